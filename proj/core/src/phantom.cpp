#include "dusnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace dus {

void PhantomSpec::validate() const {
  shape.validate();
  if (n_ellipses == 0) throw InvalidArgument("phantom: need at least one ellipse");
  if (!(motion >= 0.0 && motion < 0.5)) throw InvalidArgument("phantom: motion amplitude must lie in [0, 0.5)");
}

namespace {

struct Ellipse {
  double cy, cx;      // center, normalized to [-0.5, 0.5]
  double ay, ax;      // semi-axes
  double angle;
  double intensity;
  double phase;       // motion phase
  double dir;         // motion direction
  double amplitude;   // relative motion scale
};

}  // namespace

DynVolume generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Shape3T& s = spec.shape;
  constexpr double pi = std::numbers::pi;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  std::vector<Ellipse> ellipses;
  ellipses.reserve(spec.n_ellipses);
  // The first ellipse is a large static body outline; the rest sit inside it.
  ellipses.push_back(Ellipse{uniform(-0.03, 0.03), uniform(-0.03, 0.03), uniform(0.34, 0.42),
                             uniform(0.30, 0.40), uniform(0.0, pi), 0.35, 0.0, 0.0, 0.0});
  for (std::size_t e = 1; e < spec.n_ellipses; ++e) {
    Ellipse el{};
    el.cy = uniform(-0.2, 0.2);
    el.cx = uniform(-0.2, 0.2);
    el.ay = uniform(0.04, 0.14);
    el.ax = uniform(0.04, 0.14);
    el.angle = uniform(0.0, pi);
    el.intensity = uniform(0.3, 0.9);
    el.phase = uniform(0.0, 2.0 * pi);
    el.dir = uniform(0.0, 2.0 * pi);
    el.amplitude = uniform(0.5, 1.0);
    ellipses.push_back(el);
  }

  const double edge = 0.08;  // width of the smooth boundary in normalized radius
  DynVolume v(s);
  for (std::size_t f = 0; f < s.t; ++f) {
    const double cycle = 2.0 * pi * static_cast<double>(f) / static_cast<double>(s.t);
    for (std::size_t y = 0; y < s.h; ++y) {
      const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(s.h) - 0.5;
      for (std::size_t x = 0; x < s.w; ++x) {
        const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(s.w) - 0.5;
        double mag = 0.0;
        for (const Ellipse& el : ellipses) {
          const double shift = spec.motion * el.amplitude * std::sin(cycle + el.phase);
          const double cy = el.cy + shift * std::sin(el.dir);
          const double cx = el.cx + shift * std::cos(el.dir);
          const double dy = py - cy;
          const double dx = px - cx;
          const double ca = std::cos(el.angle);
          const double sa = std::sin(el.angle);
          const double ry = (ca * dy + sa * dx) / el.ay;
          const double rx = (-sa * dy + ca * dx) / el.ax;
          const double r = std::sqrt(ry * ry + rx * rx);
          mag += el.intensity * 0.5 * (1.0 - std::tanh((r - 1.0) / edge));
        }
        const double phi = 0.6 * pi * (py + 0.5 * px) + 0.4 * pi * (py * py - px * px);
        v(y, x, f) = std::polar(mag, phi);
      }
    }
  }

  double peak = 0.0;
  for (const cplx& c : v.data()) peak = std::max(peak, std::abs(c));
  if (peak > 0.0) {
    for (cplx& c : v.data()) c /= peak;
  }
  return v;
}

}  // namespace dus
