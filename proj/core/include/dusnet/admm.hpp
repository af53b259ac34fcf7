#pragma once

#include <cstddef>
#include <vector>

#include "dusnet/encoding.hpp"
#include "dusnet/fft.hpp"
#include "dusnet/volume.hpp"

namespace dus {

enum class XUpdate { closed_form, cg };

/// Unitary sparsifying transform used by the Z-update.
enum class SparseTransform { temporal_fourier, identity };

struct AdmmConfig {
  double lambda = 0.01;  ///< weight of the transformed l1 term
  double mu = 0.1;       ///< augmented-Lagrangian penalty
  double eta = 1.0;      ///< multiplier update rate
  std::size_t n_iters = 50;
  double cg_tol = 1e-8;
  std::size_t cg_max_iters = 200;
  XUpdate x_update = XUpdate::closed_form;
  SparseTransform transform = SparseTransform::temporal_fourier;

  void validate() const;
};

/// Iterates of the splitting; l is the scaled multiplier W / mu.
struct AdmmState {
  DynVolume x;
  DynVolume z;
  DynVolume l;
};

/// Complex soft thresholding u * max(1 - tau/|u|, 0), with 0 at u = 0.
DynVolume soft_threshold_complex(const DynVolume& v, double tau);

DynVolume temporal_fft(const DynVolume& v, FftDirection dir);

/// Applies the sparsifying transform or its adjoint (inverse).
DynVolume apply_transform(const DynVolume& v, SparseTransform transform, FftDirection dir);

/// Z = T^H ST(T(X + L), lambda / mu)
DynVolume z_update(const AdmmState& state, const AdmmConfig& cfg);

/// Exact minimizer of 0.5 ||A X - b||^2 + mu/2 ||Z - X - L||^2 for the
/// Cartesian encoding, evaluated per k-space location.
DynVolume x_update_closed_form(const DynVolume& z, const DynVolume& l, const KSpace& b, const EncodingOp& op,
                               double mu);

struct CgResult {
  DynVolume x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Solves (A^H A + mu I) X = A^H b + mu (Z - L) with conjugate gradients,
/// starting from Z - L. Stops at relative residual <= tol or max_iters.
CgResult x_update_cg(const DynVolume& z, const DynVolume& l, const KSpace& b, const EncodingOp& op, double mu,
                     double tol, std::size_t max_iters);

/// L - eta (Z - X)
DynVolume l_update(const AdmmState& state, double eta);

struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;     ///< fidelity + lambda * l1
  double fidelity = 0.0;      ///< 0.5 ||A X - b||^2
  double l1 = 0.0;            ///< ||T X||_1
  double constraint = 0.0;    ///< ||Z - X||_F
  std::size_t cg_iterations = 0;
};

struct AdmmResult {
  DynVolume x;
  AdmmState state;
  std::vector<IterationRecord> history;
};

/// 0.5 ||A x - b||^2 and ||T x||_1.
IterationRecord evaluate_objective(const DynVolume& x, const KSpace& b, const EncodingOp& op,
                                   const AdmmConfig& cfg);

/// Runs cfg.n_iters Z/X/L sweeps from X0 = A^H b, Z0 = X0, L0 = 0.
AdmmResult reconstruct(const KSpace& b, const EncodingOp& op, const AdmmConfig& cfg);

}  // namespace dus
