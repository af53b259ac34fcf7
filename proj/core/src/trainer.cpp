#include "dusnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dusnet/io.hpp"

namespace dus {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw InvalidArgument("train: lr0 must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgument("train: decay must lie in (0, 1]");
  if (epochs == 0) throw InvalidArgument("train: epochs must be positive");
  if (batch == 0) throw InvalidArgument("train: batch must be positive");
  if (!(zeta >= 0.0)) throw InvalidArgument("train: zeta must be >= 0");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("train: noise_sigma must be >= 0");
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, double lr) {
  auto pv = parameter_views(params);
  const auto gv = parameter_views(grads);
  if (pv.size() != gv.size()) throw InvalidArgument("adam: gradient structure does not match parameters");
  for (std::size_t t = 0; t < pv.size(); ++t) {
    if (pv[t].values.size() != gv[t].values.size()) {
      throw InvalidArgument("adam: gradient tensor " + gv[t].name + " does not match parameter shape");
    }
    for (double g : gv[t].values) {
      if (!std::isfinite(g)) throw NumericalFailure("adam: non-finite gradient in tensor " + gv[t].name);
    }
  }
  if (state.m.empty()) {
    for (const ParamView& p : pv) {
      state.m.emplace_back(p.values.size(), 0.0);
      state.v.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.m.size() != pv.size()) throw InvalidArgument("adam: state does not match parameters");

  ++state.step;
  const double c1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < pv.size(); ++t) {
    auto p = pv[t].values;
    auto g = gv[t].values;
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = AdamState::beta1 * m[i] + (1.0 - AdamState::beta1) * g[i];
      v[i] = AdamState::beta2 * v[i] + (1.0 - AdamState::beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::eps);
    }
  }
}

double lr_schedule(std::size_t step, double lr0, double decay, std::size_t decay_steps) {
  if (decay_steps == 0) throw InvalidArgument("lr_schedule: decay_steps must be positive");
  return lr0 * std::pow(decay, static_cast<double>(step) / static_cast<double>(decay_steps));
}

std::vector<DynVolume> extract_patches(const DynVolume& v, const PatchSpec& spec) {
  const Shape3T& s = v.shape();
  const Shape3T& c = spec.crop;
  c.validate();
  if (spec.stride.h == 0 || spec.stride.w == 0 || spec.stride.t == 0) {
    throw InvalidArgument("patches: strides must be >= 1");
  }
  if (c.h > s.h || c.w > s.w || c.t > s.t) {
    throw InvalidArgument("patches: crop " + c.str() + " exceeds volume " + s.str());
  }
  std::vector<DynVolume> patches;
  for (std::size_t y0 = 0; y0 + c.h <= s.h; y0 += spec.stride.h) {
    for (std::size_t x0 = 0; x0 + c.w <= s.w; x0 += spec.stride.w) {
      for (std::size_t t0 = 0; t0 + c.t <= s.t; t0 += spec.stride.t) {
        DynVolume p(c);
        for (std::size_t y = 0; y < c.h; ++y) {
          for (std::size_t x = 0; x < c.w; ++x) {
            for (std::size_t f = 0; f < c.t; ++f) p(y, x, f) = v(y0 + y, x0 + x, t0 + f);
          }
        }
        patches.push_back(std::move(p));
      }
    }
  }
  return patches;
}

LossValue mse_loss(const DynVolume& x_hat, const DynVolume& x_gt) {
  if (!(x_hat.shape() == x_gt.shape())) {
    throw InvalidArgument("mse: shape mismatch " + x_hat.shape().str() + " vs " + x_gt.shape().str());
  }
  const double count = 2.0 * static_cast<double>(x_hat.size());
  LossValue out{0.0, sub(x_hat, x_gt)};
  double acc = 0.0;
  for (cplx& d : out.grad.data()) {
    acc += std::norm(d);
    d *= 2.0 / count;
  }
  out.value = acc / count;
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t sample, std::uint64_t epoch) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ sample) ^ (epoch * 0x632be59bd9b4e019ULL));
}

TrainResult train_loop(const std::vector<DynVolume>& dataset, const MaskGenerator& masks,
                       const NetworkConfig& net_cfg, const TrainConfig& cfg,
                       const std::function<void(const LossRecord&)>& on_record) {
  return train_loop(dataset, masks, net_cfg, cfg, init_network(net_cfg, derive_seed(cfg.seed, ~0ULL, 0)),
                    on_record);
}

TrainResult train_loop(const std::vector<DynVolume>& dataset, const MaskGenerator& masks,
                       const NetworkConfig& net_cfg, const TrainConfig& cfg, NetworkParams initial,
                       const std::function<void(const LossRecord&)>& on_record) {
  cfg.validate();
  net_cfg.validate();
  if (dataset.empty()) throw InvalidArgument("train: dataset is empty");
  if (!masks) throw InvalidArgument("train: no mask generator");
  if (net_cfg.dc_mode != DcMode::closed_form) {
    throw UnsupportedMode("train: only dc_mode = closed_form supports backpropagation");
  }
  initial.validate(net_cfg);

  const std::size_t steps_per_epoch = (dataset.size() + cfg.batch - 1) / cfg.batch;
  const std::size_t decay_steps = cfg.decay_steps == 0 ? steps_per_epoch : cfg.decay_steps;

  TrainResult result{std::move(initial), {}, 0};
  AdamState adam;
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, ~1ULL, 0));
  std::vector<std::size_t> order(dataset.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t first = 0; first < order.size(); first += cfg.batch) {
      const std::size_t last = std::min(order.size(), first + cfg.batch);
      const double inv_batch = 1.0 / static_cast<double>(last - first);
      NetworkParams grads = zeros_like(result.params);
      LossRecord rec;
      rec.step = result.steps;
      rec.lr = lr_schedule(result.steps, cfg.lr0, cfg.decay, decay_steps);

      for (std::size_t k = first; k < last; ++k) {
        const std::size_t idx = order[k];
        const DynVolume& gt = dataset[idx];
        const std::uint64_t sample_seed = derive_seed(cfg.seed, idx, epoch);
        const EncodingOp op(masks(gt.shape(), sample_seed));
        KSpace b = op.forward(gt);
        if (cfg.noise_sigma > 0.0) b = add_noise(b, op.mask(), cfg.noise_sigma, sample_seed ^ 0xa5a5a5a5ULL);

        const ForwardResult fwd = network_forward(b, op, result.params, net_cfg);
        const LossValue loss = mse_loss(fwd.x_hat, gt);
        PenaltyResult penalty_terms;
        if (cfg.zeta > 0.0) penalty_terms = inverse_penalty(fwd, result.params);
        const double penalty = penalty_terms.value;
        const double total = loss.value + cfg.zeta * penalty;
        if (!std::isfinite(total)) {
          throw NumericalFailure("train: non-finite loss at step " + std::to_string(result.steps) + " (sample " +
                                 std::to_string(idx) + ")");
        }
        rec.mse += loss.value * inv_batch;
        rec.penalty += penalty * inv_batch;
        rec.total += total * inv_batch;

        const NetworkParams g = network_backward(loss.grad, fwd, b, op, result.params, net_cfg, cfg.zeta,
                                                 cfg.zeta > 0.0 ? &penalty_terms : nullptr);
        auto dst = parameter_views(grads);
        const auto src = parameter_views(g);
        for (std::size_t t = 0; t < dst.size(); ++t) {
          for (std::size_t i = 0; i < dst[t].values.size(); ++i) dst[t].values[i] += inv_batch * src[t].values[i];
        }
      }

      adam_step(result.params, grads, adam, rec.lr);
      result.history.push_back(rec);
      ++result.steps;
      if (on_record) on_record(rec);
    }

    if (!cfg.checkpoint_path.empty()) {
      save_checkpoint(cfg.checkpoint_path,
                      Checkpoint{net_cfg, result.params, TrainingMetadata{result.steps, cfg.seed}});
    }
  }
  return result;
}

}  // namespace dus
