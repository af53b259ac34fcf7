#include "dusnet/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "dusnet/ast.hpp"
#include "dusnet/conv.hpp"
#include "dusnet/encoding.hpp"
#include "dusnet/network.hpp"
#include "dusnet/phantom.hpp"
#include "dusnet/trainer.hpp"

namespace dus {

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

namespace {

constexpr std::size_t kMaxAttempts = 200;
constexpr std::size_t kNetworkAttempts = 40;

class Recorder {
 public:
  Recorder(std::string name, double step, double tol) {
    r_.name = std::move(name);
    r_.step = step;
    r_.tolerance = tol;
  }

  void compare(const std::string& coord, double analytic, double numeric) {
    if (std::abs(analytic) + std::abs(numeric) < kGradSkipBelow) {
      ++r_.skipped;
      return;
    }
    ++r_.checked;
    const double e = relative_error(analytic, numeric);
    if (e > r_.max_rel_error || !std::isfinite(e)) {
      r_.max_rel_error = std::isfinite(e) ? e : INFINITY;
      char buf[96];
      std::snprintf(buf, sizeof buf, " analytic=%.6e numeric=%.6e", analytic, numeric);
      r_.worst = coord + buf;
    }
  }

  void skip() { ++r_.skipped; }

  GradCheckResult& result() { return r_; }

 private:
  GradCheckResult r_;
};

// Central difference of a vector-valued map contracted against fixed
// weights: sum_i w_i (f(p + h)_i - f(p - h)_i) / 2h. Taking the difference
// elementwise before summing keeps cancellation error small.
double central_difference(double& p, double h, const std::function<std::vector<double>()>& eval,
                          std::span<const double> weights) {
  const double saved = p;
  p = saved + h;
  const std::vector<double> plus = eval();
  p = saved - h;
  const std::vector<double> minus = eval();
  p = saved;
  double acc = 0.0;
  for (std::size_t i = 0; i < plus.size(); ++i) acc += weights[i] * (plus[i] - minus[i]);
  return acc / (2.0 * h);
}

std::vector<double> flatten(const DynVolume& v) {
  std::vector<double> out;
  out.reserve(2 * v.size());
  for (const cplx& c : v.data()) {
    out.push_back(c.real());
    out.push_back(c.imag());
  }
  return out;
}

std::vector<double> flatten(const ChannelTensor& c) { return {c.data().begin(), c.data().end()}; }

void fill_normal(std::span<double> values, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  for (double& v : values) v = n(rng);
}

DynVolume random_volume(const Shape3T& s, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  DynVolume v(s);
  for (cplx& c : v.data()) {
    const double re = n(rng);
    c = cplx(re, n(rng));
  }
  return v;
}

double min_abs(std::span<const double> values) {
  double m = INFINITY;
  for (double v : values) m = std::min(m, std::abs(v));
  return m;
}

double ast_margin(const AstCache& c) {
  double m = min_abs(c.hidden_pre);
  for (std::size_t ch = 0; ch < c.input.channels(); ++ch) {
    for (double x : c.input.channel(ch)) {
      m = std::min({m, std::abs(x), std::abs(std::abs(x) - c.tau[ch])});
    }
  }
  return m;
}

double stack_margin(const StackCache& cache, const TransformStack& stack) {
  double m = INFINITY;
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    if (stack.layers[k].activation == Activation::relu) {
      m = std::min(m, min_abs(cache.layers[k].pre_activation.data()));
    }
  }
  return m;
}

std::uint64_t attempt_seed(std::uint64_t seed, std::size_t attempt) { return derive_seed(seed, attempt, 0x6c); }

AstParams random_ast(std::size_t nc, std::mt19937_64& rng) {
  AstParams p = init_ast_params(nc, rng());
  fill_normal(p.b1, rng, 0.3);
  fill_normal(p.b2, rng, 0.5);
  return p;
}

void randomize_biases(TransformStack& s, std::mt19937_64& rng) {
  for (Conv3dLayer& l : s.layers) fill_normal(l.bias, rng, 0.1);
}

std::string coord(const std::string& tensor, std::size_t i) { return tensor + "[" + std::to_string(i) + "]"; }

}  // namespace

GradCheckResult gradcheck_ast(std::uint64_t seed, std::size_t nc, Shape3T shape, double step, double tolerance) {
  Recorder rec("ast", step, tolerance);
  ChannelTensor u;
  AstParams p;
  ChannelTensor weights;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) throw NumericalFailure("gradcheck ast: no kink-free draw found");
    rec.result().seed = attempt_seed(seed, attempt);
    std::mt19937_64 rng(rec.result().seed);
    u = ChannelTensor(nc, shape);
    fill_normal(u.data(), rng);
    p = random_ast(nc, rng);
    weights = ChannelTensor(nc, shape);
    fill_normal(weights.data(), rng);
    if (ast_margin(ast_forward(u, p).cache) > kKinkMargin) break;
  }

  const AstOutput fwd = ast_forward(u, p);
  const AstGradients g = ast_backward(weights, fwd.cache, p);
  auto eval = [&] { return flatten(ast_forward(u, p).out); };
  const auto w = weights.data();

  for (std::size_t i = 0; i < u.size(); ++i) {
    rec.compare(coord("input", i), g.input[i], central_difference(u[i], step, eval, w));
  }
  const std::pair<std::vector<double>*, const std::vector<double>*> tensors[] = {
      {&p.w1, &g.params.w1}, {&p.b1, &g.params.b1}, {&p.w2, &g.params.w2}, {&p.b2, &g.params.b2}};
  const char* names[] = {"w1", "b1", "w2", "b2"};
  for (std::size_t t = 0; t < 4; ++t) {
    auto& values = *tensors[t].first;
    const auto& grads = *tensors[t].second;
    for (std::size_t i = 0; i < values.size(); ++i) {
      rec.compare(coord(names[t], i), grads[i], central_difference(values[i], step, eval, w));
    }
  }
  return rec.result();
}

GradCheckResult gradcheck_conv(std::uint64_t seed, bool relu, double step, double tolerance) {
  Recorder rec(relu ? "conv3d-relu" : "conv3d-linear", step, tolerance);
  const Shape3T shape{4, 4, 2};
  ChannelTensor x;
  Conv3dLayer layer;
  ChannelTensor weights;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) throw NumericalFailure("gradcheck conv: no kink-free draw found");
    rec.result().seed = attempt_seed(seed, attempt);
    std::mt19937_64 rng(rec.result().seed);
    x = ChannelTensor(2, shape);
    fill_normal(x.data(), rng);
    layer = init_conv_layer(2, 3, relu ? Activation::relu : Activation::linear, rng());
    fill_normal(layer.bias, rng, 0.1);
    weights = ChannelTensor(3, shape);
    fill_normal(weights.data(), rng);
    if (!relu || min_abs(conv3d_forward(x, layer).cache.pre_activation.data()) > kKinkMargin) break;
  }
  const ConvOutput fwd = conv3d_forward(x, layer);
  const ConvGradients g = conv3d_backward(weights, fwd.cache, layer);
  auto eval = [&] { return flatten(conv3d_forward(x, layer).out); };
  const auto w = weights.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    rec.compare(coord("input", i), g.input[i], central_difference(x[i], step, eval, w));
  }
  for (std::size_t i = 0; i < layer.weights.size(); ++i) {
    rec.compare(coord("weight", i), g.weights[i], central_difference(layer.weights[i], step, eval, w));
  }
  for (std::size_t i = 0; i < layer.bias.size(); ++i) {
    rec.compare(coord("bias", i), g.bias[i], central_difference(layer.bias[i], step, eval, w));
  }
  return rec.result();
}

GradCheckResult gradcheck_stack(std::uint64_t seed, double step, double tolerance) {
  Recorder rec("stack", step, tolerance);
  const Shape3T shape{4, 4, 2};
  ChannelTensor x;
  TransformStack stack;
  ChannelTensor weights;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) throw NumericalFailure("gradcheck stack: no kink-free draw found");
    rec.result().seed = attempt_seed(seed, attempt);
    std::mt19937_64 rng(rec.result().seed);
    x = ChannelTensor(2, shape);
    fill_normal(x.data(), rng);
    stack = init_stack(2, 3, 2, 2, rng());
    randomize_biases(stack, rng);
    weights = ChannelTensor(2, shape);
    fill_normal(weights.data(), rng);
    if (stack_margin(stack_forward(x, stack).cache, stack) > kKinkMargin) break;
  }
  const StackOutput fwd = stack_forward(x, stack);
  const StackGradients g = stack_backward(weights, fwd.cache, stack);
  auto eval = [&] { return flatten(stack_forward(x, stack).out); };
  const auto w = weights.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    rec.compare(coord("input", i), g.input[i], central_difference(x[i], step, eval, w));
  }
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    Conv3dLayer& layer = stack.layers[k];
    const std::string base = "layer" + std::to_string(k) + ".";
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      rec.compare(coord(base + "weight", i), g.layers[k].weights[i],
                  central_difference(layer.weights[i], step, eval, w));
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      rec.compare(coord(base + "bias", i), g.layers[k].bias[i], central_difference(layer.bias[i], step, eval, w));
    }
  }
  return rec.result();
}

namespace {

double zblock_margin(const ZBlockCache& c, const PhaseParams& ph) {
  return std::min({stack_margin(c.f, ph.f), ast_margin(c.ast), stack_margin(c.fhat, ph.fhat)});
}

PhaseParams random_phase(std::size_t nc, std::mt19937_64& rng) {
  PhaseParams ph;
  ph.f = init_stack(2, nc, nc, 2, rng());
  ph.fhat = init_stack(nc, nc, 2, 2, rng());
  randomize_biases(ph.f, rng);
  randomize_biases(ph.fhat, rng);
  ph.ast = random_ast(nc, rng);
  std::normal_distribution<double> n(0.0, 0.5);
  ph.mu_raw = n(rng);
  ph.eta_raw = n(rng);
  return ph;
}

}  // namespace

GradCheckResult gradcheck_zblock(std::uint64_t seed, double step, double tolerance) {
  Recorder rec("z-block", step, tolerance);
  const Shape3T shape{4, 4, 2};
  const std::size_t nc = 4;
  DynVolume x, l;
  PhaseParams ph;
  DynVolume weights;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) throw NumericalFailure("gradcheck z-block: no kink-free draw found");
    rec.result().seed = attempt_seed(seed, attempt);
    std::mt19937_64 rng(rec.result().seed);
    x = random_volume(shape, rng);
    l = random_volume(shape, rng, 0.3);
    ph = random_phase(nc, rng);
    weights = random_volume(shape, rng);
    if (zblock_margin(z_block(x, l, ph).cache, ph) > kKinkMargin) break;
  }
  const ZBlockOutput fwd = z_block(x, l, ph);
  const ZBlockGradients g = z_block_backward(weights, fwd.cache, ph);
  auto eval = [&] { return flatten(z_block(x, l, ph).z); };
  const std::vector<double> w = flatten(weights);

  for (std::size_t i = 0; i < x.size(); ++i) {
    double* parts = reinterpret_cast<double*>(&x[i]);
    rec.compare(coord("input.re", i), g.input[i].real(), central_difference(parts[0], step, eval, w));
    rec.compare(coord("input.im", i), g.input[i].imag(), central_difference(parts[1], step, eval, w));
  }
  NetworkParams wrapped{{ph}};
  NetworkParams grad_wrapped{{g.params}};
  grad_wrapped.phases[0].mu_raw = 0.0;
  grad_wrapped.phases[0].eta_raw = 0.0;
  // Evaluate through the wrapped copy so the views alias what eval reads.
  auto eval_wrapped = [&] { return flatten(z_block(x, l, wrapped.phases[0]).z); };
  auto pv = parameter_views(wrapped);
  const auto gv = parameter_views(grad_wrapped);
  for (std::size_t t = 0; t < pv.size(); ++t) {
    if (pv[t].name.ends_with("mu_raw") || pv[t].name.ends_with("eta_raw")) continue;
    for (std::size_t i = 0; i < pv[t].values.size(); ++i) {
      rec.compare(coord(pv[t].name, i), gv[t].values[i],
                  central_difference(pv[t].values[i], step, eval_wrapped, w));
    }
  }
  return rec.result();
}

namespace {

struct NetworkProblem {
  NetworkConfig cfg;
  NetworkParams params;
  DynVolume gt;
  SamplingMask mask;
  KSpace b;
};

double network_margin(const ForwardResult& fwd, const NetworkParams& params, bool with_penalty) {
  double m = INFINITY;
  for (std::size_t n = 0; n < params.phases.size(); ++n) {
    const PhaseParams& ph = params.phases[n];
    const PhaseCache& pc = fwd.phases[n];
    m = std::min(m, zblock_margin(pc.zblock, ph));
    if (with_penalty) {
      const StackOutput f = stack_forward(to_channels(add(pc.x_prev, pc.l_prev)), ph.f);
      const StackOutput fh = stack_forward(f.out, ph.fhat);
      m = std::min({m, stack_margin(f.cache, ph.f), stack_margin(fh.cache, ph.fhat)});
    }
  }
  return m;
}

void push_signs(std::vector<signed char>& out, std::span<const double> values) {
  for (double v : values) out.push_back(static_cast<signed char>((v > 0.0) - (v < 0.0)));
}

void stack_regime(std::vector<signed char>& out, const StackCache& cache, const TransformStack& stack) {
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    if (stack.layers[k].activation == Activation::relu) push_signs(out, cache.layers[k].pre_activation.data());
  }
}

// Which side of every kink the forward pass sits on. Two evaluations with
// equal regimes lie on the same smooth piece.
std::vector<signed char> network_regime(const ForwardResult& fwd, const NetworkParams& params, bool with_penalty) {
  std::vector<signed char> out;
  for (std::size_t n = 0; n < params.phases.size(); ++n) {
    const PhaseParams& ph = params.phases[n];
    const ZBlockCache& c = fwd.phases[n].zblock;
    stack_regime(out, c.f, ph.f);
    push_signs(out, c.ast.hidden_pre);
    for (std::size_t ch = 0; ch < c.ast.input.channels(); ++ch) {
      for (double x : c.ast.input.channel(ch)) {
        push_signs(out, std::array{x, std::abs(x) - c.ast.tau[ch]});
      }
    }
    stack_regime(out, c.fhat, ph.fhat);
    if (with_penalty) {
      const PhaseCache& pc = fwd.phases[n];
      const StackOutput f = stack_forward(to_channels(add(pc.x_prev, pc.l_prev)), ph.f);
      stack_regime(out, stack_forward(f.out, ph.fhat).cache, ph.fhat);
    }
  }
  return out;
}

NetworkProblem draw_network_problem(std::uint64_t seed, std::size_t n_phases, std::size_t nc, Shape3T shape) {
  std::mt19937_64 rng(seed);
  NetworkProblem p;
  p.cfg.n_phases = n_phases;
  p.cfg.nc = nc;
  p.params.phases.clear();
  for (std::size_t n = 0; n < n_phases; ++n) p.params.phases.push_back(random_phase(nc, rng));
  p.gt = generate_phantom(PhantomSpec{shape, 3, 0.1, rng()});
  p.mask = make_vds_mask(shape, 2.0, 2, rng());
  const EncodingOp op(p.mask);
  p.b = op.forward(p.gt);
  return p;
}

// Per-phase penalty residuals fhat(f(u)) - u, flattened and concatenated.
std::vector<double> penalty_residuals(const ForwardResult& fwd, const NetworkParams& params) {
  std::vector<double> out;
  for (std::size_t n = 0; n < params.phases.size(); ++n) {
    const PhaseParams& ph = params.phases[n];
    const PhaseCache& pc = fwd.phases[n];
    const ChannelTensor u = to_channels(add(pc.x_prev, pc.l_prev));
    const ChannelTensor r = sub(stack_forward(stack_forward(u, ph.f).out, ph.fhat).out, u);
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  return out;
}

}  // namespace

GradCheckResult gradcheck_penalty(std::uint64_t seed, double step, double tolerance) {
  Recorder rec("inverse-penalty", step, tolerance);
  NetworkProblem p;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) throw NumericalFailure("gradcheck penalty: no kink-free draw found");
    rec.result().seed = attempt_seed(seed, attempt);
    p = draw_network_problem(rec.result().seed, 2, 4, {4, 4, 2});
    const EncodingOp op(p.mask);
    if (network_margin(network_forward(p.b, op, p.params, p.cfg), p.params, true) > kKinkMargin) break;
  }
  const EncodingOp op(p.mask);
  const ForwardResult fwd = network_forward(p.b, op, p.params, p.cfg);
  const PenaltyResult pen = inverse_penalty(fwd, p.params);

  // Stack parameters only, holding the cached phase inputs fixed.
  auto pv = parameter_views(p.params);
  const auto gv = parameter_views(pen.grads);
  for (std::size_t t = 0; t < pv.size(); ++t) {
    if (pv[t].name.find(".f.") == std::string::npos && pv[t].name.find(".fhat.") == std::string::npos) continue;
    for (std::size_t i = 0; i < pv[t].values.size(); ++i) {
      double& v = pv[t].values[i];
      const double saved = v;
      v = saved + step;
      const std::vector<double> rp = penalty_residuals(fwd, p.params);
      v = saved - step;
      const std::vector<double> rm = penalty_residuals(fwd, p.params);
      v = saved;
      double diff = 0.0;
      for (std::size_t k = 0; k < rp.size(); ++k) diff += (rp[k] - rm[k]) * (rp[k] + rm[k]);
      rec.compare(coord(pv[t].name, i), gv[t].values[i], diff / (2.0 * step));
    }
  }
  return rec.result();
}

GradCheckResult gradcheck_network(std::uint64_t seed, std::size_t n_phases, std::size_t nc, Shape3T shape,
                                  double zeta, double step, double tolerance) {
  Recorder rec(zeta > 0.0 ? "network+penalty" : "network", step, tolerance);
  const bool with_penalty = zeta > 0.0;
  // A full network rarely clears every kink by kKinkMargin, so keep the
  // widest draw and drop the coordinates whose perturbation changes regime.
  NetworkProblem p;
  double best = -1.0;
  for (std::size_t attempt = 0; attempt < kNetworkAttempts && best <= kKinkMargin; ++attempt) {
    const std::uint64_t s = attempt_seed(seed, attempt);
    NetworkProblem cand = draw_network_problem(s, n_phases, nc, shape);
    const double m = network_margin(network_forward(cand.b, EncodingOp(cand.mask), cand.params, cand.cfg),
                                    cand.params, with_penalty);
    if (m > best) {
      best = m;
      p = std::move(cand);
      rec.result().seed = s;
    }
  }
  const EncodingOp op(p.mask);
  const ForwardResult fwd = network_forward(p.b, op, p.params, p.cfg);
  const std::vector<signed char> regime = network_regime(fwd, p.params, with_penalty);
  const LossValue loss = mse_loss(fwd.x_hat, p.gt);
  const NetworkParams grads = network_backward(loss.grad, fwd, p.b, op, p.params, p.cfg, zeta);

  const double count = 2.0 * static_cast<double>(p.gt.size());
  const std::vector<double> g = flatten(p.gt);

  // The loss difference is assembled from elementwise differences,
  // |e+|^2 - |e-|^2 = (e+ - e-)(e+ + e-) per real component, which keeps
  // cancellation error far below the gradients being checked.
  auto pv = parameter_views(p.params);
  const auto gv = parameter_views(grads);
  for (std::size_t t = 0; t < pv.size(); ++t) {
    for (std::size_t i = 0; i < pv[t].values.size(); ++i) {
      double& v = pv[t].values[i];
      const double saved = v;
      v = saved + step;
      const ForwardResult plus = network_forward(p.b, op, p.params, p.cfg);
      // Residuals and regimes read p.params, so they are taken before the
      // parameter moves again.
      const std::vector<double> rp = with_penalty ? penalty_residuals(plus, p.params) : std::vector<double>{};
      const bool same_plus = network_regime(plus, p.params, with_penalty) == regime;
      v = saved - step;
      const ForwardResult minus = network_forward(p.b, op, p.params, p.cfg);
      const std::vector<double> rm = with_penalty ? penalty_residuals(minus, p.params) : std::vector<double>{};
      const bool same_minus = network_regime(minus, p.params, with_penalty) == regime;
      v = saved;
      if (!same_plus || !same_minus) {
        rec.skip();
        continue;
      }

      const std::vector<double> xp = flatten(plus.x_hat);
      const std::vector<double> xm = flatten(minus.x_hat);
      double diff = 0.0;
      for (std::size_t k = 0; k < xp.size(); ++k) diff += (xp[k] - xm[k]) * ((xp[k] - g[k]) + (xm[k] - g[k]));
      diff /= count;
      if (with_penalty) {
        double pd = 0.0;
        for (std::size_t k = 0; k < rp.size(); ++k) pd += (rp[k] - rm[k]) * (rp[k] + rm[k]);
        diff += zeta * pd;
      }
      rec.compare(coord(pv[t].name, i), gv[t].values[i], diff / (2.0 * step));
    }
  }
  return rec.result();
}

GradCheckResult gradcheck_mse(std::uint64_t seed, double step, double tolerance) {
  Recorder rec("mse", step, tolerance);
  rec.result().seed = seed;
  std::mt19937_64 rng(seed);
  const Shape3T shape{3, 3, 2};
  DynVolume x = random_volume(shape, rng);
  const DynVolume gt = random_volume(shape, rng);
  const LossValue loss = mse_loss(x, gt);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double* parts = reinterpret_cast<double*>(&x[i]);
    for (int c = 0; c < 2; ++c) {
      const double saved = parts[c];
      parts[c] = saved + step;
      const double lp = mse_loss(x, gt).value;
      parts[c] = saved - step;
      const double lm = mse_loss(x, gt).value;
      parts[c] = saved;
      const double analytic = c == 0 ? loss.grad[i].real() : loss.grad[i].imag();
      rec.compare(coord(c == 0 ? "re" : "im", i), analytic, (lp - lm) / (2.0 * step));
    }
  }
  return rec.result();
}

}  // namespace dus
