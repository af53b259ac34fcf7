#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dusnet/errors.hpp"

namespace dus {

using cplx = std::complex<double>;

/// Grid extent of a dynamic series: h rows (y), w columns (x), t frames.
///
/// Storage everywhere is row-major over (y, x, t) with t fastest, so the
/// linear index of voxel (y, x, f) is (y * w + x) * t + f.
struct Shape3T {
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t t = 1;

  [[nodiscard]] constexpr std::size_t size() const noexcept { return h * w * t; }
  [[nodiscard]] constexpr std::size_t frame_size() const noexcept { return h * w; }
  [[nodiscard]] constexpr std::size_t index(std::size_t y, std::size_t x, std::size_t f) const noexcept {
    return (y * w + x) * t + f;
  }
  friend constexpr bool operator==(const Shape3T&, const Shape3T&) = default;

  /// Throws InvalidArgument if any extent is zero or the product overflows.
  void validate() const;
  [[nodiscard]] std::string str() const;
};

/// Parses "HxWxT" (e.g. "64x64x8").
Shape3T parse_shape(const std::string& text);

namespace detail {
struct ImageDomain {};
struct FourierDomain {};
}  // namespace detail

/// Dense complex grid; the tag separates image-space volumes from k-space data.
template <class Domain>
class ComplexGrid {
 public:
  ComplexGrid() = default;
  explicit ComplexGrid(Shape3T shape) : shape_(shape), data_((shape.validate(), shape.size())) {}
  ComplexGrid(Shape3T shape, std::vector<cplx> data) : shape_(shape), data_(std::move(data)) {
    shape_.validate();
    if (data_.size() != shape_.size()) {
      throw InvalidArgument("grid data length " + std::to_string(data_.size()) + " does not match shape " +
                            shape_.str());
    }
  }

  [[nodiscard]] const Shape3T& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<cplx> data() noexcept { return data_; }
  [[nodiscard]] std::span<const cplx> data() const noexcept { return data_; }

  cplx& operator[](std::size_t i) noexcept { return data_[i]; }
  const cplx& operator[](std::size_t i) const noexcept { return data_[i]; }
  cplx& operator()(std::size_t y, std::size_t x, std::size_t f) noexcept { return data_[shape_.index(y, x, f)]; }
  const cplx& operator()(std::size_t y, std::size_t x, std::size_t f) const noexcept {
    return data_[shape_.index(y, x, f)];
  }

  [[nodiscard]] bool all_finite() const noexcept {
    for (const cplx& v : data_) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
  }

  friend bool operator==(const ComplexGrid&, const ComplexGrid&) = default;

 private:
  Shape3T shape_{};
  std::vector<cplx> data_;
};

/// Complex dynamic image X.
using DynVolume = ComplexGrid<detail::ImageDomain>;
/// Complex k-space samples b on the full Cartesian grid (zero where unsampled).
using KSpace = ComplexGrid<detail::FourierDomain>;

/// Real feature tensor laid out as [channel][y][x][t].
class ChannelTensor {
 public:
  ChannelTensor() = default;
  ChannelTensor(std::size_t channels, Shape3T shape);
  ChannelTensor(std::size_t channels, Shape3T shape, std::vector<double> data);

  [[nodiscard]] std::size_t channels() const noexcept { return channels_; }
  [[nodiscard]] const Shape3T& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::size_t channel_size() const noexcept { return shape_.size(); }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> channel(std::size_t c) noexcept {
    return std::span<double>(data_).subspan(c * shape_.size(), shape_.size());
  }
  [[nodiscard]] std::span<const double> channel(std::size_t c) const noexcept {
    return std::span<const double>(data_).subspan(c * shape_.size(), shape_.size());
  }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  const double& operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t c, std::size_t y, std::size_t x, std::size_t f) noexcept {
    return data_[c * shape_.size() + shape_.index(y, x, f)];
  }
  const double& operator()(std::size_t c, std::size_t y, std::size_t x, std::size_t f) const noexcept {
    return data_[c * shape_.size() + shape_.index(y, x, f)];
  }

  [[nodiscard]] bool all_finite() const noexcept;

  friend bool operator==(const ChannelTensor&, const ChannelTensor&) = default;

 private:
  std::size_t channels_ = 0;
  Shape3T shape_{};
  std::vector<double> data_;
};

/// Channel 0 holds real parts, channel 1 imaginary parts.
ChannelTensor to_channels(const DynVolume& v);
/// Inverse of to_channels; requires exactly two channels.
DynVolume from_channels(const ChannelTensor& c);

// Elementwise algebra. Every binary operation requires equal shapes and
// throws InvalidArgument otherwise.

DynVolume add(const DynVolume& a, const DynVolume& b);
DynVolume sub(const DynVolume& a, const DynVolume& b);
DynVolume neg(const DynVolume& a);
DynVolume scale(const DynVolume& a, cplx alpha);
/// y <- y + alpha * x
void axpy(cplx alpha, const DynVolume& x, DynVolume& y);
/// sum conj(a) * b
cplx inner_product(const DynVolume& a, const DynVolume& b);
double frobenius_norm(const DynVolume& a);
double squared_norm(const DynVolume& a);

ChannelTensor add(const ChannelTensor& a, const ChannelTensor& b);
ChannelTensor sub(const ChannelTensor& a, const ChannelTensor& b);
ChannelTensor neg(const ChannelTensor& a);
ChannelTensor scale(const ChannelTensor& a, double alpha);
void axpy(double alpha, const ChannelTensor& x, ChannelTensor& y);
double inner_product(const ChannelTensor& a, const ChannelTensor& b);
double frobenius_norm(const ChannelTensor& a);

// The same algebra on k-space data, used by the data-consistency solvers.
KSpace sub(const KSpace& a, const KSpace& b);
cplx inner_product(const KSpace& a, const KSpace& b);
double frobenius_norm(const KSpace& a);

}  // namespace dus
