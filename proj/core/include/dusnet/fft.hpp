#pragma once

#include <span>

#include "dusnet/volume.hpp"

namespace dus {

enum class FftDirection { forward, inverse };

/// Orthonormal 2-D DFT over (y, x), applied independently to every frame.
/// No fftshift: the DC coefficient of each frame sits at (0, 0).
void fft2_frames_inplace(const Shape3T& shape, std::span<cplx> data, FftDirection dir);

/// Orthonormal 1-D DFT along t at every spatial location.
void fft_temporal_inplace(const Shape3T& shape, std::span<cplx> data, FftDirection dir);

DynVolume fft2_frames(const DynVolume& v, FftDirection dir);

}  // namespace dus
