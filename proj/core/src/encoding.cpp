#include "dusnet/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dusnet/fft.hpp"

namespace dus {

SamplingMask::SamplingMask(Shape3T shape, std::vector<std::uint8_t> support)
    : shape_(shape), support_(std::move(support)) {
  shape_.validate();
  if (support_.size() != shape_.size()) {
    throw InvalidArgument("mask length " + std::to_string(support_.size()) + " does not match shape " +
                          shape_.str());
  }
  for (std::uint8_t v : support_) {
    if (v > 1) throw InvalidArgument("mask entries must be 0 or 1");
  }
  for (std::size_t f = 0; f < shape_.t; ++f) {
    if (count_in_frame(f) == 0) {
      throw InvalidArgument("mask frame " + std::to_string(f) + " has no sampled location");
    }
  }
}

SamplingMask SamplingMask::full(Shape3T shape) {
  shape.validate();
  return SamplingMask(shape, std::vector<std::uint8_t>(shape.size(), 1));
}

std::size_t SamplingMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(support_.begin(), support_.end(), std::uint8_t{1}));
}

std::size_t SamplingMask::count_in_frame(std::size_t f) const noexcept {
  std::size_t n = 0;
  for (std::size_t p = 0; p < shape_.frame_size(); ++p) n += support_[p * shape_.t + f];
  return n;
}

double SamplingMask::fraction() const noexcept {
  return support_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(support_.size());
}

KSpace EncodingOp::forward(const DynVolume& x) const {
  if (!(x.shape() == shape())) {
    throw InvalidArgument("encoding forward: volume shape " + x.shape().str() + " does not match mask " +
                          shape().str());
  }
  std::vector<cplx> k(x.data().begin(), x.data().end());
  fft2_frames_inplace(shape(), k, FftDirection::forward);
  apply_mask(k);
  return KSpace(shape(), std::move(k));
}

DynVolume EncodingOp::adjoint(const KSpace& b) const {
  if (!(b.shape() == shape())) {
    throw InvalidArgument("encoding adjoint: k-space shape " + b.shape().str() + " does not match mask " +
                          shape().str());
  }
  std::vector<cplx> x(b.data().begin(), b.data().end());
  apply_mask(x);
  fft2_frames_inplace(shape(), x, FftDirection::inverse);
  return DynVolume(shape(), std::move(x));
}

void EncodingOp::apply_mask(std::span<cplx> kspace) const {
  const auto m = mask_.support();
  for (std::size_t i = 0; i < kspace.size(); ++i) {
    if (m[i] == 0) kspace[i] = cplx(0.0, 0.0);
  }
}

namespace {

// Maps a centered frequency offset to its unshifted FFT index.
std::size_t wrap(long offset, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((offset % m) + m) % m);
}

}  // namespace

SamplingMask make_pseudo_radial_mask(const Shape3T& shape, std::size_t n_spokes, std::uint64_t seed) {
  shape.validate();
  if (n_spokes == 0) throw InvalidArgument("pseudo-radial mask needs at least one spoke");

  constexpr double golden = 0.6180339887498949;
  const double spacing = std::numbers::pi / static_cast<double>(n_spokes);
  std::mt19937_64 rng(seed);
  const double base = std::uniform_real_distribution<double>(0.0, spacing)(rng);

  const double half_h = static_cast<double>(shape.h) / 2.0;
  const double half_w = static_cast<double>(shape.w) / 2.0;
  const double r_max = std::hypot(half_h, half_w) + 1.0;
  const long steps = static_cast<long>(std::ceil(r_max / 0.5));

  std::vector<std::uint8_t> support(shape.size(), 0);
  for (std::size_t f = 0; f < shape.t; ++f) {
    const double offset = base + static_cast<double>(f) * spacing * golden;
    for (std::size_t s = 0; s < n_spokes; ++s) {
      const double theta = offset + static_cast<double>(s) * spacing;
      const double dy = std::sin(theta);
      const double dx = std::cos(theta);
      for (long i = -steps; i <= steps; ++i) {
        const double r = 0.5 * static_cast<double>(i);
        const double ky = std::round(r * dy);
        const double kx = std::round(r * dx);
        if (std::abs(ky) > half_h || std::abs(kx) > half_w) continue;
        const std::size_t y = wrap(static_cast<long>(ky), shape.h);
        const std::size_t x = wrap(static_cast<long>(kx), shape.w);
        support[shape.index(y, x, f)] = 1;
      }
    }
  }
  return SamplingMask(shape, std::move(support));
}

SamplingMask make_vds_mask(const Shape3T& shape, double acceleration, std::size_t center_lines,
                           std::uint64_t seed) {
  shape.validate();
  if (!(acceleration >= 1.0) || !std::isfinite(acceleration)) {
    throw InvalidArgument("vds acceleration must be a finite value >= 1");
  }
  if (center_lines >= shape.w) {
    throw InvalidArgument("vds center_lines must be smaller than the line count " + std::to_string(shape.w));
  }
  const auto target = static_cast<std::size_t>(std::ceil(static_cast<double>(shape.w) / acceleration));
  if (target < center_lines) {
    throw InvalidArgument("vds target line count " + std::to_string(target) + " is below center_lines " +
                          std::to_string(center_lines));
  }

  const long w = static_cast<long>(shape.w);
  const double sigma = static_cast<double>(shape.w) / 6.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<std::uint8_t> support(shape.size(), 0);
  for (std::size_t f = 0; f < shape.t; ++f) {
    std::vector<bool> chosen(shape.w, false);
    std::size_t n_chosen = 0;
    const long first_center = -static_cast<long>(center_lines / 2);
    for (std::size_t c = 0; c < center_lines; ++c) {
      chosen[wrap(first_center + static_cast<long>(c), shape.w)] = true;
      ++n_chosen;
    }
    std::vector<double> weight(shape.w);
    for (long x = 0; x < w; ++x) {
      const long centered = x <= w / 2 - (w % 2 == 0 ? 1 : 0) ? x : x - w;
      weight[static_cast<std::size_t>(x)] =
          std::exp(-0.5 * static_cast<double>(centered * centered) / (sigma * sigma));
    }
    while (n_chosen < target) {
      double total = 0.0;
      for (std::size_t x = 0; x < shape.w; ++x) {
        if (!chosen[x]) total += weight[x];
      }
      const double u = uniform(rng) * total;
      double acc = 0.0;
      std::size_t pick = shape.w;
      std::size_t last_free = shape.w;
      for (std::size_t x = 0; x < shape.w; ++x) {
        if (chosen[x]) continue;
        last_free = x;
        acc += weight[x];
        if (u < acc) {
          pick = x;
          break;
        }
      }
      if (pick == shape.w) pick = last_free;
      chosen[pick] = true;
      ++n_chosen;
    }
    for (std::size_t x = 0; x < shape.w; ++x) {
      if (!chosen[x]) continue;
      for (std::size_t y = 0; y < shape.h; ++y) support[shape.index(y, x, f)] = 1;
    }
  }
  return SamplingMask(shape, std::move(support));
}

KSpace add_noise(const KSpace& b, const SamplingMask& mask, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("noise sigma must be >= 0");
  if (!(b.shape() == mask.shape())) {
    throw InvalidArgument("add_noise: k-space shape " + b.shape().str() + " does not match mask " +
                          mask.shape().str());
  }
  KSpace out = b;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!mask[i]) continue;
    const double re = normal(rng);
    const double im = normal(rng);
    data[i] += cplx(re, im);
  }
  return out;
}

}  // namespace dus
