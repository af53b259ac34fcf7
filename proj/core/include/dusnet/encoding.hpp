#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dusnet/volume.hpp"

namespace dus {

/// Binary k-space support per frame, in unshifted FFT index order (DC at
/// (0, 0) of every frame), same (y, x, t) layout as the volumes.
class SamplingMask {
 public:
  SamplingMask() = default;
  /// Validates entries in {0,1} and at least one sample per frame.
  SamplingMask(Shape3T shape, std::vector<std::uint8_t> support);

  static SamplingMask full(Shape3T shape);

  [[nodiscard]] const Shape3T& shape() const noexcept { return shape_; }
  [[nodiscard]] std::span<const std::uint8_t> support() const noexcept { return support_; }
  [[nodiscard]] bool operator[](std::size_t i) const noexcept { return support_[i] != 0; }
  [[nodiscard]] bool at(std::size_t y, std::size_t x, std::size_t f) const noexcept {
    return support_[shape_.index(y, x, f)] != 0;
  }

  [[nodiscard]] std::size_t count() const noexcept;
  [[nodiscard]] std::size_t count_in_frame(std::size_t f) const noexcept;
  [[nodiscard]] double fraction() const noexcept;

  friend bool operator==(const SamplingMask&, const SamplingMask&) = default;

 private:
  Shape3T shape_{};
  std::vector<std::uint8_t> support_;
};

/// Masked orthonormal Fourier encoding b = M F x and its adjoint F^H M b.
class EncodingOp {
 public:
  explicit EncodingOp(SamplingMask mask) : mask_(std::move(mask)) {}

  [[nodiscard]] const SamplingMask& mask() const noexcept { return mask_; }
  [[nodiscard]] const Shape3T& shape() const noexcept { return mask_.shape(); }

  [[nodiscard]] KSpace forward(const DynVolume& x) const;
  [[nodiscard]] DynVolume adjoint(const KSpace& b) const;

  /// Zeroes unsampled entries in place.
  void apply_mask(std::span<cplx> kspace) const;

 private:
  SamplingMask mask_;
};

/// Pseudo-radial pattern: n_spokes lines through the k-space center per
/// frame, uniformly spaced by pi/n_spokes. Frame f is rotated by
/// f * (pi/n_spokes) * 0.618... on top of a seed-dependent base rotation.
/// Spokes are rasterized in half-pixel radial steps with nearest-neighbour
/// rounding, so every frame is point-symmetric about DC and contains DC.
SamplingMask make_pseudo_radial_mask(const Shape3T& shape, std::size_t n_spokes, std::uint64_t seed);

inline constexpr std::size_t kDefaultCenterLines = 4;

/// Variable-density Cartesian pattern of full lines along y, selected over
/// the x (phase-encode) axis. center_lines lines around DC are always kept;
/// the remaining ceil(w / acceleration) - center_lines lines are drawn
/// without replacement with Gaussian weights (std w/6) in the distance from
/// DC. Each frame draws independently.
SamplingMask make_vds_mask(const Shape3T& shape, double acceleration, std::size_t center_lines,
                           std::uint64_t seed);

/// Adds i.i.d. complex Gaussian noise (std sigma per real component) at the
/// sampled locations of mask; unsampled entries are left untouched.
KSpace add_noise(const KSpace& b, const SamplingMask& mask, double sigma, std::uint64_t seed);

}  // namespace dus
