#pragma once

#include <cstddef>
#include <cstdint>

#include "dusnet/volume.hpp"

namespace dus {

struct PhantomSpec {
  Shape3T shape{64, 64, 8};
  std::size_t n_ellipses = 6;
  double motion = 0.05;  ///< peak displacement as a fraction of the field of view, < 0.5
  std::uint64_t seed = 0;

  void validate() const;
};

/// Synthetic cine-like series: smooth-edged ellipses whose centers move
/// sinusoidally over one period of t frames, each with its own motion phase
/// and direction, times a fixed smooth phase map. Peak magnitude is 1.
DynVolume generate_phantom(const PhantomSpec& spec);

}  // namespace dus
