#include "dusnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace dus {

double psnr(const DynVolume& x_hat, const DynVolume& x_gt) {
  if (!(x_hat.shape() == x_gt.shape())) {
    throw InvalidArgument("psnr: shape mismatch " + x_hat.shape().str() + " vs " + x_gt.shape().str());
  }
  double peak = 0.0;
  for (const cplx& v : x_gt.data()) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw InvalidArgument("psnr: ground truth is identically zero");
  const auto a = x_hat.data();
  const auto b = x_gt.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::norm(a[i] - b[i]);
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak / std::sqrt(mse));
}

double ssim(const DynVolume& x_hat, const DynVolume& x_gt) {
  if (!(x_hat.shape() == x_gt.shape())) {
    throw InvalidArgument("ssim: shape mismatch " + x_hat.shape().str() + " vs " + x_gt.shape().str());
  }
  const Shape3T& s = x_gt.shape();
  constexpr std::size_t win = kSsimWindow;
  if (s.h < win || s.w < win) {
    throw InvalidArgument("ssim: frame " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                          " is smaller than the 7x7 window");
  }
  double range = 0.0;
  for (const cplx& v : x_gt.data()) range = std::max(range, std::abs(v));
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  // Summed-area tables of a, b, a^2, b^2, ab per frame.
  const std::size_t H = s.h, W = s.w;
  const std::size_t stride = W + 1;
  std::vector<double> sa((H + 1) * stride), sb(sa.size()), saa(sa.size()), sbb(sa.size()), sab(sa.size());
  const double n = static_cast<double>(win * win);
  double total = 0.0;
  std::size_t windows = 0;

  for (std::size_t f = 0; f < s.t; ++f) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double a = std::abs(x_hat(y, x, f));
        const double b = std::abs(x_gt(y, x, f));
        const std::size_t k = (y + 1) * stride + (x + 1);
        const std::size_t up = y * stride + (x + 1);
        const std::size_t left = (y + 1) * stride + x;
        const std::size_t diag = y * stride + x;
        sa[k] = a + sa[up] + sa[left] - sa[diag];
        sb[k] = b + sb[up] + sb[left] - sb[diag];
        saa[k] = a * a + saa[up] + saa[left] - saa[diag];
        sbb[k] = b * b + sbb[up] + sbb[left] - sbb[diag];
        sab[k] = a * b + sab[up] + sab[left] - sab[diag];
      }
    }
    auto box = [&](const std::vector<double>& t, std::size_t y0, std::size_t x0) {
      const std::size_t y1 = y0 + win, x1 = x0 + win;
      return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0];
    };
    for (std::size_t y0 = 0; y0 + win <= H; ++y0) {
      for (std::size_t x0 = 0; x0 + win <= W; ++x0) {
        const double ma = box(sa, y0, x0) / n;
        const double mb = box(sb, y0, x0) / n;
        const double va = box(saa, y0, x0) / n - ma * ma;
        const double vb = box(sbb, y0, x0) / n - mb * mb;
        const double cov = box(sab, y0, x0) / n - ma * mb;
        const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += den > 0.0 ? num / den : 1.0;
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace dus
