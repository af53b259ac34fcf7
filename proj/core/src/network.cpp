#include "dusnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "dusnet/admm.hpp"
#include "dusnet/fft.hpp"

namespace dus {

void NetworkConfig::validate() const {
  if (n_phases == 0) throw InvalidArgument("network: n_phases must be positive");
  if (nc == 0) throw InvalidArgument("network: nc must be positive");
  if (f_depth == 0 || fhat_depth == 0) throw InvalidArgument("network: stack depths must be positive");
  if (!(cg_tol > 0.0) || cg_max_iters == 0) throw InvalidArgument("network: invalid cg settings");
  if (!(init_mu > 0.0) || !(init_eta > 0.0)) throw InvalidArgument("network: initial mu and eta must be > 0");
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  // exp underflows below about -745; keep the result strictly positive.
  return std::max(std::log1p(std::exp(x)), std::numeric_limits<double>::min());
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw InvalidArgument("softplus_inverse: argument must be > 0");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

namespace {

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double real_dot(const DynVolume& a, const DynVolume& b) { return inner_product(a, b).real(); }

void require_stack(const TransformStack& s, std::size_t in, std::size_t out, std::size_t depth, const char* role,
                   std::size_t phase) {
  s.validate();
  if (s.layers.size() != depth || s.in_channels() != in || s.out_channels() != out) {
    throw InvalidArgument("network: phase " + std::to_string(phase) + " " + role + " stack does not match the " +
                          "configured " + std::to_string(in) + "->" + std::to_string(out) + " depth " +
                          std::to_string(depth));
  }
}

TransformStack stack_from_gradients(const TransformStack& like, const StackGradients& g) {
  TransformStack out = like;
  for (std::size_t k = 0; k < out.layers.size(); ++k) {
    out.layers[k].weights = g.layers[k].weights;
    out.layers[k].bias = g.layers[k].bias;
  }
  return out;
}

void accumulate(TransformStack& dst, const TransformStack& src) {
  for (std::size_t k = 0; k < dst.layers.size(); ++k) {
    for (std::size_t i = 0; i < dst.layers[k].weights.size(); ++i) dst.layers[k].weights[i] += src.layers[k].weights[i];
    for (std::size_t i = 0; i < dst.layers[k].bias.size(); ++i) dst.layers[k].bias[i] += src.layers[k].bias[i];
  }
}

std::string phase_prefix(std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "phase%02zu.", n);
  return buf;
}

template <class View, class Params>
std::vector<View> views_impl(Params& params) {
  std::vector<View> views;
  for (std::size_t n = 0; n < params.phases.size(); ++n) {
    auto& ph = params.phases[n];
    const std::string prefix = phase_prefix(n);
    auto add_stack = [&](auto& stack, const char* role) {
      for (std::size_t k = 0; k < stack.layers.size(); ++k) {
        auto& layer = stack.layers[k];
        const std::string base = prefix + role + "." + std::to_string(k) + ".";
        views.push_back(View{base + "weight", {layer.out_ch, layer.in_ch, 3, 3, 3}, layer.weights});
        views.push_back(View{base + "bias", {layer.out_ch}, layer.bias});
      }
    };
    add_stack(ph.f, "f");
    add_stack(ph.fhat, "fhat");
    const std::size_t nc = ph.ast.nc;
    views.push_back(View{prefix + "ast.w1", {nc, nc}, ph.ast.w1});
    views.push_back(View{prefix + "ast.b1", {nc}, ph.ast.b1});
    views.push_back(View{prefix + "ast.w2", {nc, nc}, ph.ast.w2});
    views.push_back(View{prefix + "ast.b2", {nc}, ph.ast.b2});
    views.push_back(View{prefix + "mu_raw", {1}, {&ph.mu_raw, 1}});
    views.push_back(View{prefix + "eta_raw", {1}, {&ph.eta_raw, 1}});
  }
  return views;
}

}  // namespace

double PhaseParams::mu() const { return softplus(mu_raw); }
double PhaseParams::eta() const { return softplus(eta_raw); }

void NetworkParams::validate(const NetworkConfig& cfg) const {
  cfg.validate();
  if (phases.size() != cfg.n_phases) {
    throw InvalidArgument("network: " + std::to_string(phases.size()) + " phases, config expects " +
                          std::to_string(cfg.n_phases));
  }
  for (std::size_t n = 0; n < phases.size(); ++n) {
    const PhaseParams& ph = phases[n];
    require_stack(ph.f, 2, cfg.nc, cfg.f_depth, "analysis", n);
    require_stack(ph.fhat, cfg.nc, 2, cfg.fhat_depth, "synthesis", n);
    ph.ast.validate();
    if (ph.ast.nc != cfg.nc) throw InvalidArgument("network: AST channel count does not match nc");
    if (!std::isfinite(ph.mu_raw) || !std::isfinite(ph.eta_raw)) {
      throw InvalidArgument("network: mu/eta parameters must be finite");
    }
  }
}

NetworkParams init_network(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NetworkParams params;
  std::mt19937_64 rng(seed);
  const double mu_raw = softplus_inverse(cfg.init_mu);
  const double eta_raw = softplus_inverse(cfg.init_eta);
  for (std::size_t n = 0; n < cfg.n_phases; ++n) {
    PhaseParams ph;
    ph.f = init_stack(2, cfg.nc, cfg.nc, cfg.f_depth, rng());
    ph.fhat = init_stack(cfg.nc, cfg.nc, 2, cfg.fhat_depth, rng());
    ph.ast = init_ast_params(cfg.nc, rng());
    ph.mu_raw = mu_raw;
    ph.eta_raw = eta_raw;
    params.phases.push_back(std::move(ph));
  }
  return params;
}

NetworkParams zeros_like(const NetworkParams& params) {
  NetworkParams out = params;
  for (ParamView& v : parameter_views(out)) std::fill(v.values.begin(), v.values.end(), 0.0);
  return out;
}

std::vector<ParamView> parameter_views(NetworkParams& params) { return views_impl<ParamView>(params); }

std::vector<ConstParamView> parameter_views(const NetworkParams& params) {
  return views_impl<ConstParamView>(params);
}

std::size_t parameter_count(const NetworkParams& params) {
  std::size_t n = 0;
  for (const ConstParamView& v : parameter_views(params)) n += v.values.size();
  return n;
}

ZBlockOutput z_block(const DynVolume& x, const DynVolume& l, const PhaseParams& phase) {
  StackOutput f = stack_forward(to_channels(add(x, l)), phase.f);
  AstOutput shrunk = ast_forward(f.out, phase.ast);
  StackOutput fhat = stack_forward(shrunk.out, phase.fhat);
  if (fhat.out.channels() != 2) throw InvalidArgument("z-block: synthesis stack must produce 2 channels");
  return ZBlockOutput{from_channels(fhat.out),
                      ZBlockCache{std::move(f.cache), std::move(shrunk.cache), std::move(fhat.cache)}};
}

ZBlockGradients z_block_backward(const DynVolume& grad_z, const ZBlockCache& cache, const PhaseParams& phase) {
  StackGradients g_fhat = stack_backward(to_channels(grad_z), cache.fhat, phase.fhat);
  AstGradients g_ast = ast_backward(g_fhat.input, cache.ast, phase.ast);
  StackGradients g_f = stack_backward(g_ast.input, cache.f, phase.f);

  ZBlockGradients out{from_channels(g_f.input), PhaseParams{}};
  out.params.f = stack_from_gradients(phase.f, g_f);
  out.params.fhat = stack_from_gradients(phase.fhat, g_fhat);
  out.params.ast = std::move(g_ast.params);
  return out;
}

DynVolume x_block(const DynVolume& z, const DynVolume& l, const KSpace& b, const EncodingOp& op, double mu,
                  const NetworkConfig& cfg) {
  if (cfg.dc_mode == DcMode::closed_form) return x_update_closed_form(z, l, b, op, mu);
  return x_update_cg(z, l, b, op, mu, cfg.cg_tol, cfg.cg_max_iters).x;
}

PhaseCache phase_forward(const DynVolume& x_prev, const DynVolume& l_prev, const KSpace& b, const EncodingOp& op,
                         const PhaseParams& phase, const NetworkConfig& cfg) {
  PhaseCache pc;
  pc.x_prev = x_prev;
  pc.l_prev = l_prev;
  ZBlockOutput zb = z_block(x_prev, l_prev, phase);
  pc.z = std::move(zb.z);
  pc.zblock = std::move(zb.cache);
  pc.x = x_block(pc.z, l_prev, b, op, phase.mu(), cfg);
  pc.l = l_update(AdmmState{pc.x, pc.z, l_prev}, phase.eta());
  return pc;
}

ForwardResult network_forward(const KSpace& b, const EncodingOp& op, const NetworkParams& params,
                              const NetworkConfig& cfg) {
  params.validate(cfg);
  if (!(b.shape() == op.shape())) {
    throw InvalidArgument("network: k-space shape " + b.shape().str() + " does not match mask " +
                          op.shape().str());
  }
  ForwardResult result;
  result.phases.reserve(params.phases.size());
  const DynVolume x0 = op.adjoint(b);
  const DynVolume l0(op.shape());
  for (const PhaseParams& ph : params.phases) {
    const bool first = result.phases.empty();
    result.phases.push_back(phase_forward(first ? x0 : result.phases.back().x,
                                          first ? l0 : result.phases.back().l, b, op, ph, cfg));
  }
  const DynVolume& x = result.phases.back().x;
  if (!x.all_finite()) throw NumericalFailure("network: output contains non-finite values");
  result.x_hat = x;
  return result;
}

PenaltyResult inverse_penalty(const ForwardResult& fwd, const NetworkParams& params) {
  if (fwd.phases.size() != params.phases.size()) {
    throw InvalidArgument("inverse penalty: forward cache does not match the parameters");
  }
  PenaltyResult result{0.0, zeros_like(params), {}};
  for (std::size_t n = 0; n < params.phases.size(); ++n) {
    const PhaseParams& ph = params.phases[n];
    const PhaseCache& pc = fwd.phases[n];
    const ChannelTensor u = to_channels(add(pc.x_prev, pc.l_prev));
    StackOutput f = stack_forward(u, ph.f);
    StackOutput fhat = stack_forward(f.out, ph.fhat);
    const ChannelTensor r = sub(fhat.out, u);
    const double rn = frobenius_norm(r);
    result.value += rn * rn;

    const ChannelTensor grad_r = scale(r, 2.0);
    StackGradients g_fhat = stack_backward(grad_r, fhat.cache, ph.fhat);
    StackGradients g_f = stack_backward(g_fhat.input, f.cache, ph.f);
    ChannelTensor grad_u = g_f.input;
    axpy(-1.0, grad_r, grad_u);

    PhaseParams& gp = result.grads.phases[n];
    gp.f = stack_from_gradients(ph.f, g_f);
    gp.fhat = stack_from_gradients(ph.fhat, g_fhat);
    result.grad_inputs.push_back(from_channels(grad_u));
  }
  return result;
}

NetworkParams network_backward(const DynVolume& grad_x_hat, const ForwardResult& fwd, const KSpace& b,
                               const EncodingOp& op, const NetworkParams& params, const NetworkConfig& cfg,
                               double zeta, const PenaltyResult* penalty) {
  if (cfg.dc_mode != DcMode::closed_form) {
    throw UnsupportedMode("network backward requires dc_mode = closed_form; cg is inference-only");
  }
  if (!(zeta >= 0.0)) throw InvalidArgument("network backward: zeta must be >= 0");
  if (fwd.phases.size() != params.phases.size()) {
    throw InvalidArgument("network backward: forward cache does not match the parameters");
  }
  if (!(grad_x_hat.shape() == op.shape())) {
    throw InvalidArgument("network backward: gradient shape does not match the encoding");
  }

  NetworkParams grads = zeros_like(params);
  PenaltyResult own_penalty;
  if (zeta > 0.0 && penalty == nullptr) {
    own_penalty = inverse_penalty(fwd, params);
    penalty = &own_penalty;
  }
  if (zeta > 0.0 && penalty->grad_inputs.size() != params.phases.size()) {
    throw InvalidArgument("network backward: penalty does not match the forward cache");
  }

  const Shape3T& shape = op.shape();
  const SamplingMask& mask = op.mask();
  const auto bk = b.data();

  DynVolume g_x = grad_x_hat;      // dLoss/dX_n
  DynVolume g_l(shape);            // dLoss/dL_n

  for (std::size_t n = params.phases.size(); n-- > 0;) {
    const PhaseParams& ph = params.phases[n];
    const PhaseCache& pc = fwd.phases[n];
    PhaseParams& gp = grads.phases[n];
    const double mu = ph.mu();
    const double eta = ph.eta();

    // L_n = L_{n-1} - eta (Z_n - X_n)
    const double d_eta = -real_dot(g_l, sub(pc.z, pc.x));
    gp.eta_raw = d_eta * sigmoid(ph.eta_raw);
    DynVolume g_z = scale(g_l, cplx(-eta, 0.0));
    DynVolume g_x_total = g_x;
    axpy(cplx(eta, 0.0), g_l, g_x_total);
    DynVolume g_l_prev = g_l;

    // X_n = F^H [(b + mu F Y) / (M + mu)] with Y = Z_n - L_{n-1}
    DynVolume y_hat = sub(pc.z, pc.l_prev);
    fft2_frames_inplace(shape, y_hat.data(), FftDirection::forward);
    DynVolume g_hat = g_x_total;
    fft2_frames_inplace(shape, g_hat.data(), FftDirection::forward);
    auto gh = g_hat.data();
    const auto yh = y_hat.data();
    double d_mu = 0.0;
    const double denom = (1.0 + mu) * (1.0 + mu);
    for (std::size_t k = 0; k < gh.size(); ++k) {
      if (!mask[k]) continue;
      d_mu += (std::conj(gh[k]) * (yh[k] - bk[k])).real() / denom;
      gh[k] *= mu / (1.0 + mu);
    }
    gp.mu_raw = d_mu * sigmoid(ph.mu_raw);
    fft2_frames_inplace(shape, gh, FftDirection::inverse);
    axpy(cplx(1.0, 0.0), g_hat, g_z);
    axpy(cplx(-1.0, 0.0), g_hat, g_l_prev);

    // Z_n = G_n(X_{n-1} + L_{n-1})
    ZBlockGradients zg = z_block_backward(g_z, pc.zblock, ph);
    gp.f = std::move(zg.params.f);
    gp.fhat = std::move(zg.params.fhat);
    gp.ast = std::move(zg.params.ast);
    DynVolume g_u = std::move(zg.input);

    if (zeta > 0.0) {
      axpy(cplx(zeta, 0.0), penalty->grad_inputs[n], g_u);
      TransformStack pf = penalty->grads.phases[n].f;
      TransformStack pfh = penalty->grads.phases[n].fhat;
      for (auto* s : {&pf, &pfh}) {
        for (auto& layer : s->layers) {
          for (double& v : layer.weights) v *= zeta;
          for (double& v : layer.bias) v *= zeta;
        }
      }
      accumulate(gp.f, pf);
      accumulate(gp.fhat, pfh);
    }

    g_x = g_u;
    axpy(cplx(1.0, 0.0), g_u, g_l_prev);
    g_l = std::move(g_l_prev);
  }
  return grads;
}

}  // namespace dus
