#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dusnet/volume.hpp"

namespace dus {

/// Outcome of comparing analytic gradients with central finite differences.
/// Coordinates where |analytic| + |numeric| < skip_below are not compared.
struct GradCheckResult {
  std::string name;
  double tolerance = 0.0;
  double step = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  std::string worst;  ///< coordinate with the largest relative error
  std::uint64_t seed = 0;  ///< seed of the accepted (kink-free) draw

  [[nodiscard]] bool passed() const { return checked > 0 && max_rel_error < tolerance; }
};

inline constexpr double kGradSkipBelow = 1e-8;
/// Inputs whose kink quantities (|x| - tau, ReLU pre-activations, x itself)
/// come closer than this to zero are redrawn.
inline constexpr double kKinkMargin = 1e-4;

/// |a - n| / max(|a|, |n|)
double relative_error(double analytic, double numeric);

/// AST operator: every input coordinate and every FC parameter.
GradCheckResult gradcheck_ast(std::uint64_t seed, std::size_t nc = 4, Shape3T shape = {4, 4, 2},
                              double step = 1e-6, double tolerance = 1e-5);

/// Single conv layer (2 -> 3 channels by default) incl. input gradient.
GradCheckResult gradcheck_conv(std::uint64_t seed, bool relu, double step = 1e-6, double tolerance = 1e-5);

/// Two-layer conv stack.
GradCheckResult gradcheck_stack(std::uint64_t seed, double step = 1e-6, double tolerance = 1e-5);

/// Z-block in isolation, input and all stack/AST parameters.
GradCheckResult gradcheck_zblock(std::uint64_t seed, double step = 1e-5, double tolerance = 1e-5);

/// Inverse penalty w.r.t. the stack parameters of a 2-phase network.
GradCheckResult gradcheck_penalty(std::uint64_t seed, double step = 1e-5, double tolerance = 1e-5);

/// Whole unrolled network (closed-form data consistency) under an MSE loss,
/// optionally with zeta * inverse penalty added. Coordinates whose +-step
/// perturbation moves any ReLU, soft-threshold or pooling kink are counted
/// as skipped.
GradCheckResult gradcheck_network(std::uint64_t seed, std::size_t n_phases = 2, std::size_t nc = 4,
                                  Shape3T shape = {8, 8, 4}, double zeta = 0.0, double step = 1e-5,
                                  double tolerance = 1e-4);

/// MSE loss gradient.
GradCheckResult gradcheck_mse(std::uint64_t seed, double step = 1e-6, double tolerance = 1e-5);

}  // namespace dus
