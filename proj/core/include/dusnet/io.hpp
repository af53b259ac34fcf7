#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "dusnet/encoding.hpp"
#include "dusnet/network.hpp"
#include "dusnet/volume.hpp"

namespace dus {

// DMRT container, all integers little-endian, no padding:
//   "DMRT" | u32 version = 1 | u32 ndims | u32 dims[ndims] | u8 dtype | payload
// dtype 1: complex, f64 (re, im) pairs; 3: real f64; 0: mask, one u8 (0/1)
// per element. Payload is row-major over dims.
//
// Volumes, k-space and masks use dims [h, w, t]; channel tensors [c, h, w, t].

enum class DmrtType : std::uint8_t { mask = 0, complex = 1, real = 3 };

inline constexpr std::uint32_t kDmrtVersion = 1;
inline constexpr std::uint32_t kDuscVersion = 1;

struct DmrtArray {
  std::vector<std::uint32_t> dims;
  DmrtType type = DmrtType::complex;
  std::vector<unsigned char> payload;  ///< raw little-endian bytes
};

void write_dmrt(std::ostream& os, const DmrtArray& array);
DmrtArray read_dmrt(std::istream& is);

void save_dmrt(const std::filesystem::path& path, const DynVolume& v);
void save_dmrt(const std::filesystem::path& path, const KSpace& k);
void save_dmrt(const std::filesystem::path& path, const SamplingMask& m);
void save_dmrt(const std::filesystem::path& path, const ChannelTensor& c);

DynVolume load_volume(const std::filesystem::path& path);
KSpace load_kspace(const std::filesystem::path& path);
SamplingMask load_mask(const std::filesystem::path& path);
ChannelTensor load_channels(const std::filesystem::path& path);

// DUSC checkpoint, little-endian:
//   "DUSC" | u32 version = 1
//   | u32 n_phases | u32 nc | u8 dc_mode (0 closed_form, 1 cg) | u32 f_depth | u32 fhat_depth
//   | u32 n_tensors | n_tensors x (u32 name_len | name | u32 ndims | u32 dims[ndims] | f64 payload)
//   | u64 step | u64 seed

struct TrainingMetadata {
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct Checkpoint {
  NetworkConfig config;
  NetworkParams params;
  TrainingMetadata meta;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dus
