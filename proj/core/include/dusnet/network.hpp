#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dusnet/ast.hpp"
#include "dusnet/conv.hpp"
#include "dusnet/encoding.hpp"
#include "dusnet/volume.hpp"

namespace dus {

enum class DcMode { closed_form, cg };

struct NetworkConfig {
  std::size_t n_phases = 15;
  std::size_t nc = 16;
  std::size_t f_depth = 2;     ///< layers in the analysis transform (2 -> nc)
  std::size_t fhat_depth = 2;  ///< layers in the synthesis transform (nc -> 2)
  DcMode dc_mode = DcMode::closed_form;
  double cg_tol = 1e-8;
  std::size_t cg_max_iters = 200;
  double init_mu = 0.5;
  double init_eta = 1.0;

  void validate() const;
};

/// Learnable quantities of one unrolled phase. mu and eta are stored
/// through softplus so they stay strictly positive.
struct PhaseParams {
  TransformStack f;
  TransformStack fhat;
  AstParams ast;
  double mu_raw = 0.0;
  double eta_raw = 0.0;

  [[nodiscard]] double mu() const;
  [[nodiscard]] double eta() const;
  friend bool operator==(const PhaseParams&, const PhaseParams&) = default;
};

struct NetworkParams {
  std::vector<PhaseParams> phases;

  /// Throws InvalidArgument when the parameters do not fit cfg.
  void validate(const NetworkConfig& cfg) const;
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

double softplus(double x);
double softplus_inverse(double y);

NetworkParams init_network(const NetworkConfig& cfg, std::uint64_t seed);

/// Same structure as params with every value zero.
NetworkParams zeros_like(const NetworkParams& params);

/// Named, shaped view of one parameter tensor.
template <class T>
struct BasicParamView {
  std::string name;
  std::vector<std::size_t> dims;
  std::span<T> values;
};
using ParamView = BasicParamView<double>;
using ConstParamView = BasicParamView<const double>;

/// Every tensor of params in a fixed order, e.g. "phase00.f.0.weight",
/// "phase00.ast.w1", "phase00.mu_raw".
std::vector<ParamView> parameter_views(NetworkParams& params);
std::vector<ConstParamView> parameter_views(const NetworkParams& params);
std::size_t parameter_count(const NetworkParams& params);

struct ZBlockCache {
  StackCache f;
  AstCache ast;
  StackCache fhat;
};

struct ZBlockOutput {
  DynVolume z;
  ZBlockCache cache;
};

/// z = from_channels(fhat(AST(f(to_channels(x + l)))))
ZBlockOutput z_block(const DynVolume& x, const DynVolume& l, const PhaseParams& phase);

struct ZBlockGradients {
  DynVolume input;  ///< gradient w.r.t. x + l
  PhaseParams params;  ///< stack and AST entries filled; mu_raw/eta_raw zero
};

ZBlockGradients z_block_backward(const DynVolume& grad_z, const ZBlockCache& cache, const PhaseParams& phase);

/// Data consistency (A^H A + mu)^{-1} (A^H b + mu (z - l)).
DynVolume x_block(const DynVolume& z, const DynVolume& l, const KSpace& b, const EncodingOp& op, double mu,
                  const NetworkConfig& cfg);

struct PhaseCache {
  DynVolume x_prev;
  DynVolume l_prev;
  DynVolume z;
  DynVolume x;
  DynVolume l;
  ZBlockCache zblock;
};

/// One Z/X/L phase from (X_{n-1}, L_{n-1}).
PhaseCache phase_forward(const DynVolume& x_prev, const DynVolume& l_prev, const KSpace& b, const EncodingOp& op,
                         const PhaseParams& phase, const NetworkConfig& cfg);

struct ForwardResult {
  DynVolume x_hat;
  std::vector<PhaseCache> phases;
};

/// Unrolled Z/X/L phases from X0 = A^H b, L0 = 0.
ForwardResult network_forward(const KSpace& b, const EncodingOp& op, const NetworkParams& params,
                              const NetworkConfig& cfg);

struct PenaltyResult {
  double value = 0.0;
  NetworkParams grads;                  ///< stack entries only
  std::vector<DynVolume> grad_inputs;   ///< per phase, w.r.t. the Z-block input X + L
};

/// Gradient of a real loss with respect to every parameter, given the
/// gradient with respect to the output (d/dRe + i d/dIm). When zeta > 0 the
/// gradient of zeta * inverse_penalty is included; pass the penalty if it
/// was already evaluated for fwd to avoid recomputing it. Requires
/// dc_mode == closed_form.
NetworkParams network_backward(const DynVolume& grad_x_hat, const ForwardResult& fwd, const KSpace& b,
                               const EncodingOp& op, const NetworkParams& params, const NetworkConfig& cfg,
                               double zeta = 0.0, const PenaltyResult* penalty = nullptr);

/// sum over phases of ||fhat(f(u_n)) - u_n||^2 where u_n = X_{n-1} + L_{n-1}
/// is the input the phase's transforms see.
PenaltyResult inverse_penalty(const ForwardResult& fwd, const NetworkParams& params);

}  // namespace dus
