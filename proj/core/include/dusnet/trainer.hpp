#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dusnet/encoding.hpp"
#include "dusnet/network.hpp"
#include "dusnet/volume.hpp"

namespace dus {

struct TrainConfig {
  double lr0 = 0.001;
  double decay = 0.95;
  std::size_t decay_steps = 0;  ///< 0 means one epoch's worth of steps
  std::size_t epochs = 1;
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  double zeta = 0.0;            ///< inverse-penalty weight
  double noise_sigma = 0.0;
  std::string checkpoint_path;  ///< written after every epoch when non-empty

  void validate() const;
};

/// Bias-corrected Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
struct AdamState {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

/// Applies one Adam update to every tensor of params. Throws
/// NumericalFailure naming the first tensor with a non-finite gradient,
/// before anything is modified.
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, double lr);

/// lr0 * decay^(step / decay_steps), continuous exponent.
double lr_schedule(std::size_t step, double lr0, double decay, std::size_t decay_steps);

struct PatchSpec {
  Shape3T crop;
  Shape3T stride{1, 1, 1};
};

/// All crops at offsets k * stride that fit entirely, offsets in row-major
/// (y, x, t) order.
std::vector<DynVolume> extract_patches(const DynVolume& v, const PatchSpec& spec);

struct LossValue {
  double value = 0.0;
  DynVolume grad;  ///< d loss / d Re + i d loss / d Im
};

/// Mean over the 2*h*w*t real components of the squared error.
LossValue mse_loss(const DynVolume& x_hat, const DynVolume& x_gt);

struct LossRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double mse = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

/// Produces the mask for one training sample from its derived seed.
using MaskGenerator = std::function<SamplingMask(const Shape3T& shape, std::uint64_t seed)>;

/// Seed for (global seed, sample index, epoch); splitmix-style mixing.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t sample, std::uint64_t epoch);

struct TrainResult {
  NetworkParams params;
  std::vector<LossRecord> history;
  std::size_t steps = 0;
};

/// Per step: b = M F x_gt (+ noise), forward, MSE (+ zeta * penalty),
/// backward, Adam. Sample order is reshuffled every epoch from the seed.
/// on_record, when set, is called after each step.
TrainResult train_loop(const std::vector<DynVolume>& dataset, const MaskGenerator& masks,
                       const NetworkConfig& net_cfg, const TrainConfig& cfg,
                       const std::function<void(const LossRecord&)>& on_record = {});

/// Same as above but continues from existing parameters.
TrainResult train_loop(const std::vector<DynVolume>& dataset, const MaskGenerator& masks,
                       const NetworkConfig& net_cfg, const TrainConfig& cfg, NetworkParams initial,
                       const std::function<void(const LossRecord&)>& on_record = {});

}  // namespace dus
