#pragma once

#include <algorithm>
#include <cmath>

#include "dusnet/volume.hpp"

namespace dus::test {

// Direct-summation PSNR and sliding-window SSIM, written independently of the library.
inline double psnr_reference(const DynVolume& a, const DynVolume& b) {
  long double se = 0.0L;
  double peak = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double dr = a[i].real() - b[i].real();
    const long double di = a[i].imag() - b[i].imag();
    se += dr * dr + di * di;
    peak = std::max(peak, std::hypot(b[i].real(), b[i].imag()));
  }
  const double mse = static_cast<double>(se / a.size());
  return 10.0 * std::log10(peak * peak / mse);
}

inline double ssim_reference(const DynVolume& a, const DynVolume& b) {
  const Shape3T s = a.shape();
  double peak = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) peak = std::max(peak, std::abs(b[i]));
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t f = 0; f < s.t; ++f)
    for (std::size_t y0 = 0; y0 + 7 <= s.h; ++y0)
      for (std::size_t x0 = 0; x0 + 7 <= s.w; ++x0) {
        double ma = 0, mb = 0;
        for (std::size_t y = y0; y < y0 + 7; ++y)
          for (std::size_t x = x0; x < x0 + 7; ++x) {
            ma += std::abs(a(y, x, f));
            mb += std::abs(b(y, x, f));
          }
        ma /= 49.0;
        mb /= 49.0;
        double va = 0, vb = 0, cov = 0;
        for (std::size_t y = y0; y < y0 + 7; ++y)
          for (std::size_t x = x0; x < x0 + 7; ++x) {
            const double da = std::abs(a(y, x, f)) - ma;
            const double db = std::abs(b(y, x, f)) - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
          }
        va /= 49.0;
        vb /= 49.0;
        cov /= 49.0;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
  return total / static_cast<double>(windows);
}

}  // namespace dus::test
