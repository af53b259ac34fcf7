#pragma once

#include "dusnet/volume.hpp"

namespace dus {

/// 20 log10(peak / sqrt(mse)) with peak = max |x_gt| and mse the mean
/// squared complex error. Returns +infinity for identical inputs.
double psnr(const DynVolume& x_hat, const DynVolume& x_gt);

inline constexpr int kSsimWindow = 7;

/// Mean SSIM of the magnitude images over every fully contained 7x7 window
/// of every frame. Uniform window, population statistics, K1 = 0.01,
/// K2 = 0.03, dynamic range = max |x_gt|.
double ssim(const DynVolume& x_hat, const DynVolume& x_gt);

}  // namespace dus
