#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dusnet/network.hpp"
#include "dusnet/trainer.hpp"
#include "dusnet/volume.hpp"

namespace dus::cli {

/// Everything the `train` subcommand needs, read from a flat key=value file.
/// Lines starting with '#' and blank lines are ignored.
struct TrainSetup {
  NetworkConfig net;
  TrainConfig train;

  // Training data: n_train synthetic phantoms, or explicit DMRT volumes.
  std::size_t n_train = 20;
  Shape3T shape{32, 32, 8};
  std::size_t ellipses = 6;
  double motion = 0.05;
  std::uint64_t data_seed = 100;
  std::vector<std::string> data_files;
  // Optional patch extraction (crop 0x0x0 disables it).
  Shape3T patch{0, 0, 0};
  Shape3T patch_stride{1, 1, 1};

  // Per-sample masks.
  std::string pattern = "radial";
  std::size_t spokes = 8;
  double accel = 4.0;
  std::size_t center_lines = 4;
};

/// Throws InvalidArgument on unknown keys or malformed values.
TrainSetup parse_train_config(std::istream& is);
TrainSetup load_train_config(const std::string& path);

}  // namespace dus::cli
