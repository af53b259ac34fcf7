#include "dusnet/volume.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace dus {

void Shape3T::validate() const {
  if (h == 0 || w == 0 || t == 0) {
    throw InvalidArgument("shape " + str() + " has a zero extent");
  }
  constexpr std::size_t max = std::numeric_limits<std::size_t>::max() / sizeof(cplx);
  if (h > max / w || h * w > max / t) {
    throw InvalidArgument("shape " + str() + " is too large");
  }
}

std::string Shape3T::str() const {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(t);
}

Shape3T parse_shape(const std::string& text) {
  std::size_t dims[3] = {0, 0, 0};
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 3; ++i) {
    auto [next, ec] = std::from_chars(p, end, dims[i]);
    if (ec != std::errc{} || next == p) {
      throw InvalidArgument("malformed shape '" + text + "', expected HxWxT");
    }
    p = next;
    if (i < 2) {
      if (p == end || (*p != 'x' && *p != 'X')) {
        throw InvalidArgument("malformed shape '" + text + "', expected HxWxT");
      }
      ++p;
    }
  }
  if (p != end) throw InvalidArgument("malformed shape '" + text + "', expected HxWxT");
  Shape3T s{dims[0], dims[1], dims[2]};
  s.validate();
  return s;
}

ChannelTensor::ChannelTensor(std::size_t channels, Shape3T shape) : channels_(channels), shape_(shape) {
  shape_.validate();
  if (channels_ == 0) throw InvalidArgument("channel tensor needs at least one channel");
  data_.assign(channels_ * shape_.size(), 0.0);
}

ChannelTensor::ChannelTensor(std::size_t channels, Shape3T shape, std::vector<double> data)
    : channels_(channels), shape_(shape), data_(std::move(data)) {
  shape_.validate();
  if (channels_ == 0) throw InvalidArgument("channel tensor needs at least one channel");
  if (data_.size() != channels_ * shape_.size()) {
    throw InvalidArgument("channel tensor data length " + std::to_string(data_.size()) + " does not match " +
                          std::to_string(channels_) + "x" + shape_.str());
  }
}

bool ChannelTensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ChannelTensor to_channels(const DynVolume& v) {
  ChannelTensor c(2, v.shape());
  auto re = c.channel(0);
  auto im = c.channel(1);
  const auto src = v.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    re[i] = src[i].real();
    im[i] = src[i].imag();
  }
  return c;
}

DynVolume from_channels(const ChannelTensor& c) {
  if (c.channels() != 2) {
    throw InvalidArgument("from_channels expects 2 channels, got " + std::to_string(c.channels()));
  }
  DynVolume v(c.shape());
  auto re = c.channel(0);
  auto im = c.channel(1);
  auto dst = v.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = cplx(re[i], im[i]);
  return v;
}

namespace {

template <class A>
void require_same_shape(const A& a, const A& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

void require_same_layout(const ChannelTensor& a, const ChannelTensor& b, const char* op) {
  if (a.channels() != b.channels() || !(a.shape() == b.shape())) {
    throw InvalidArgument(std::string(op) + ": layout mismatch " + std::to_string(a.channels()) + "x" +
                          a.shape().str() + " vs " + std::to_string(b.channels()) + "x" + b.shape().str());
  }
}

template <class G, class Op>
G zip(const G& a, const G& b, Op op, const char* name) {
  require_same_shape(a, b, name);
  G out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = op(x[i], y[i]);
  return out;
}

template <class G>
cplx complex_dot(const G& a, const G& b) {
  require_same_shape(a, b, "inner_product");
  cplx acc{0.0, 0.0};
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::conj(x[i]) * y[i];
  return acc;
}

template <class G>
double complex_norm2(const G& a) {
  double acc = 0.0;
  for (const cplx& v : a.data()) acc += std::norm(v);
  return acc;
}

}  // namespace

DynVolume add(const DynVolume& a, const DynVolume& b) {
  return zip(a, b, [](cplx x, cplx y) { return x + y; }, "add");
}
DynVolume sub(const DynVolume& a, const DynVolume& b) {
  return zip(a, b, [](cplx x, cplx y) { return x - y; }, "sub");
}
DynVolume neg(const DynVolume& a) { return scale(a, cplx(-1.0, 0.0)); }
DynVolume scale(const DynVolume& a, cplx alpha) {
  DynVolume out(a.shape());
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = alpha * x[i];
  return out;
}
void axpy(cplx alpha, const DynVolume& x, DynVolume& y) {
  require_same_shape(x, y, "axpy");
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * xs[i];
}
cplx inner_product(const DynVolume& a, const DynVolume& b) { return complex_dot(a, b); }
double squared_norm(const DynVolume& a) { return complex_norm2(a); }
double frobenius_norm(const DynVolume& a) { return std::sqrt(complex_norm2(a)); }

KSpace sub(const KSpace& a, const KSpace& b) {
  return zip(a, b, [](cplx x, cplx y) { return x - y; }, "sub");
}
cplx inner_product(const KSpace& a, const KSpace& b) { return complex_dot(a, b); }
double frobenius_norm(const KSpace& a) { return std::sqrt(complex_norm2(a)); }

ChannelTensor add(const ChannelTensor& a, const ChannelTensor& b) {
  require_same_layout(a, b, "add");
  ChannelTensor out = a;
  axpy(1.0, b, out);
  return out;
}
ChannelTensor sub(const ChannelTensor& a, const ChannelTensor& b) {
  require_same_layout(a, b, "sub");
  ChannelTensor out = a;
  axpy(-1.0, b, out);
  return out;
}
ChannelTensor neg(const ChannelTensor& a) { return scale(a, -1.0); }
ChannelTensor scale(const ChannelTensor& a, double alpha) {
  ChannelTensor out = a;
  for (double& v : out.data()) v *= alpha;
  return out;
}
void axpy(double alpha, const ChannelTensor& x, ChannelTensor& y) {
  require_same_layout(x, y, "axpy");
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * xs[i];
}
double inner_product(const ChannelTensor& a, const ChannelTensor& b) {
  require_same_layout(a, b, "inner_product");
  double acc = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}
double frobenius_norm(const ChannelTensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace dus
