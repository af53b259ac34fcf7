#include "dusnet/ast.hpp"

#include <cmath>
#include <random>
#include <string>

namespace dus {
namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

void AstParams::validate() const {
  if (nc == 0) throw InvalidArgument("ast: channel count must be positive");
  if (w1.size() != nc * nc || w2.size() != nc * nc || b1.size() != nc || b2.size() != nc) {
    throw InvalidArgument("ast: parameter sizes do not match " + std::to_string(nc) + " channels");
  }
  for (const auto* v : {&w1, &b1, &w2, &b2}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw InvalidArgument("ast: parameters must be finite");
    }
  }
}

AstParams init_ast_params(std::size_t nc, std::uint64_t seed) {
  AstParams p(nc);
  const double bound = 1.0 / std::sqrt(static_cast<double>(nc));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : p.w1) v = dist(rng);
  for (double& v : p.w2) v = dist(rng);
  return p;
}

AstOutput ast_forward(const ChannelTensor& u, const AstParams& p) {
  p.validate();
  if (u.channels() != p.nc) {
    throw InvalidArgument("ast: input has " + std::to_string(u.channels()) + " channels, parameters expect " +
                          std::to_string(p.nc));
  }
  const std::size_t nc = p.nc;
  const std::size_t n = u.channel_size();
  AstOutput result{ChannelTensor(nc, u.shape()), AstCache{}};
  AstCache& c = result.cache;
  c.input = u;
  c.pooled.assign(nc, 0.0);
  c.hidden_pre.assign(nc, 0.0);
  c.hidden.assign(nc, 0.0);
  c.gate_pre.assign(nc, 0.0);
  c.gate.assign(nc, 0.0);
  c.tau.assign(nc, 0.0);

  for (std::size_t ch = 0; ch < nc; ++ch) {
    double acc = 0.0;
    for (double x : u.channel(ch)) acc += std::abs(x);
    c.pooled[ch] = acc / static_cast<double>(n);
  }
  for (std::size_t i = 0; i < nc; ++i) {
    double acc = p.b1[i];
    for (std::size_t j = 0; j < nc; ++j) acc += p.w1[i * nc + j] * c.pooled[j];
    c.hidden_pre[i] = acc;
    c.hidden[i] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t i = 0; i < nc; ++i) {
    double acc = p.b2[i];
    for (std::size_t j = 0; j < nc; ++j) acc += p.w2[i * nc + j] * c.hidden[j];
    c.gate_pre[i] = acc;
    c.gate[i] = sigmoid(acc);
    c.tau[i] = c.gate[i] * c.pooled[i];
  }
  for (std::size_t ch = 0; ch < nc; ++ch) {
    const double tau = c.tau[ch];
    auto in = u.channel(ch);
    auto out = result.out.channel(ch);
    for (std::size_t k = 0; k < n; ++k) {
      const double mag = std::abs(in[k]);
      out[k] = mag > tau ? sign(in[k]) * (mag - tau) : 0.0;
    }
  }
  return result;
}

AstGradients ast_backward(const ChannelTensor& grad_out, const AstCache& cache, const AstParams& p) {
  p.validate();
  const ChannelTensor& u = cache.input;
  if (u.channels() != p.nc || cache.tau.size() != p.nc) {
    throw InvalidArgument("ast backward: cache does not match parameters");
  }
  if (grad_out.channels() != u.channels() || !(grad_out.shape() == u.shape())) {
    throw InvalidArgument("ast backward: gradient layout does not match the cached input");
  }
  const std::size_t nc = p.nc;
  const std::size_t n = u.channel_size();
  AstGradients g{ChannelTensor(nc, u.shape()), AstParams(nc)};

  // Direct path through the shrinkage, and the threshold gradient.
  std::vector<double> grad_tau(nc, 0.0);
  for (std::size_t ch = 0; ch < nc; ++ch) {
    const double tau = cache.tau[ch];
    auto in = u.channel(ch);
    auto go = grad_out.channel(ch);
    auto gi = g.input.channel(ch);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(in[k]) > tau) {
        gi[k] = go[k];
        acc -= sign(in[k]) * go[k];
      }
    }
    grad_tau[ch] = acc;
  }

  // tau = gate * pooled
  std::vector<double> grad_pooled(nc, 0.0);
  std::vector<double> grad_gate_pre(nc, 0.0);
  for (std::size_t i = 0; i < nc; ++i) {
    grad_pooled[i] = grad_tau[i] * cache.gate[i];
    const double grad_gate = grad_tau[i] * cache.pooled[i];
    grad_gate_pre[i] = grad_gate * cache.gate[i] * (1.0 - cache.gate[i]);
  }

  // Second FC layer.
  std::vector<double> grad_hidden(nc, 0.0);
  for (std::size_t i = 0; i < nc; ++i) {
    g.params.b2[i] = grad_gate_pre[i];
    for (std::size_t j = 0; j < nc; ++j) {
      g.params.w2[i * nc + j] = grad_gate_pre[i] * cache.hidden[j];
      grad_hidden[j] += p.w2[i * nc + j] * grad_gate_pre[i];
    }
  }

  // ReLU and first FC layer.
  for (std::size_t i = 0; i < nc; ++i) {
    const double gpre = cache.hidden_pre[i] > 0.0 ? grad_hidden[i] : 0.0;
    g.params.b1[i] = gpre;
    for (std::size_t j = 0; j < nc; ++j) {
      g.params.w1[i * nc + j] = gpre * cache.pooled[j];
      grad_pooled[j] += p.w1[i * nc + j] * gpre;
    }
  }

  // Global average of |x|.
  for (std::size_t ch = 0; ch < nc; ++ch) {
    const double scale = grad_pooled[ch] / static_cast<double>(n);
    if (scale == 0.0) continue;
    auto in = u.channel(ch);
    auto gi = g.input.channel(ch);
    for (std::size_t k = 0; k < n; ++k) gi[k] += scale * sign(in[k]);
  }
  return g;
}

}  // namespace dus
