#include "dusnet/conv.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace dus {

void Conv3dLayer::validate() const {
  if (in_ch == 0 || out_ch == 0) throw InvalidArgument("conv3d: channel counts must be positive");
  if (weights.size() != out_ch * in_ch * kKernelTaps || bias.size() != out_ch) {
    throw InvalidArgument("conv3d: weight sizes do not match a 3x3x3 kernel with " + std::to_string(in_ch) +
                          "->" + std::to_string(out_ch) + " channels");
  }
}

Conv3dLayer init_conv_layer(std::size_t in, std::size_t out, Activation act, std::uint64_t seed) {
  Conv3dLayer layer(in, out, act);
  const double bound = std::sqrt(6.0 / static_cast<double>(in * kKernelTaps));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : layer.weights) v = dist(rng);
  return layer;
}

namespace {

// Range of output coordinates o such that o + d stays inside [0, n) for a
// kernel offset d in {-1, 0, 1}.
struct Span1 {
  std::size_t begin;
  std::size_t end;
};

Span1 valid_range(std::size_t n, int d) {
  if (d < 0) return {1, n};
  if (d > 0) return {0, n - 1};
  return {0, n};
}

}  // namespace

// Accumulation order is fixed (output channel, input channel, tap, y, x, t)
// so results are bit-reproducible.
ConvOutput conv3d_forward(const ChannelTensor& x, const Conv3dLayer& layer) {
  layer.validate();
  if (x.channels() != layer.in_ch) {
    throw InvalidArgument("conv3d: input has " + std::to_string(x.channels()) + " channels, layer expects " +
                          std::to_string(layer.in_ch));
  }
  const Shape3T& s = x.shape();
  ChannelTensor pre(layer.out_ch, s);
  const std::size_t H = s.h, W = s.w, T = s.t;

  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    auto out = pre.channel(o);
    std::fill(out.begin(), out.end(), layer.bias[o]);
    for (std::size_t i = 0; i < layer.in_ch; ++i) {
      auto in = x.channel(i);
      for (int ky = 0; ky < 3; ++ky) {
        const Span1 ry = valid_range(H, ky - 1);
        for (int kx = 0; kx < 3; ++kx) {
          const Span1 rx = valid_range(W, kx - 1);
          for (int kt = 0; kt < 3; ++kt) {
            const Span1 rt = valid_range(T, kt - 1);
            const double w = layer.weight(o, i, ky, kx, kt);
            if (w == 0.0) continue;
            const std::ptrdiff_t shift = ((ky - 1) * static_cast<std::ptrdiff_t>(W) + (kx - 1)) *
                                             static_cast<std::ptrdiff_t>(T) +
                                         (kt - 1);
            for (std::size_t y = ry.begin; y < ry.end; ++y) {
              for (std::size_t xx = rx.begin; xx < rx.end; ++xx) {
                const std::size_t base = (y * W + xx) * T;
                double* dst = out.data() + base;
                const double* src = in.data() + static_cast<std::ptrdiff_t>(base) + shift;
                for (std::size_t f = rt.begin; f < rt.end; ++f) dst[f] += w * src[f];
              }
            }
          }
        }
      }
    }
  }

  ConvOutput result{pre, ConvCache{x, ChannelTensor{}}};
  if (layer.activation == Activation::relu) {
    for (double& v : result.out.data()) v = v > 0.0 ? v : 0.0;
  }
  result.cache.pre_activation = std::move(pre);
  return result;
}

ConvGradients conv3d_backward(const ChannelTensor& grad_out, const ConvCache& cache, const Conv3dLayer& layer) {
  layer.validate();
  const ChannelTensor& x = cache.input;
  if (x.channels() != layer.in_ch || cache.pre_activation.channels() != layer.out_ch) {
    throw InvalidArgument("conv3d backward: cache does not match the layer");
  }
  if (grad_out.channels() != layer.out_ch || !(grad_out.shape() == x.shape())) {
    throw InvalidArgument("conv3d backward: gradient layout does not match the cached output");
  }
  const Shape3T& s = x.shape();
  const std::size_t H = s.h, W = s.w, T = s.t;

  ChannelTensor g = grad_out;
  if (layer.activation == Activation::relu) {
    auto pre = cache.pre_activation.data();
    auto gd = g.data();
    for (std::size_t k = 0; k < gd.size(); ++k) {
      if (!(pre[k] > 0.0)) gd[k] = 0.0;
    }
  }

  ConvGradients grads{ChannelTensor(layer.in_ch, s), std::vector<double>(layer.weights.size(), 0.0),
                      std::vector<double>(layer.out_ch, 0.0)};

  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    auto go = g.channel(o);
    double acc = 0.0;
    for (double v : go) acc += v;
    grads.bias[o] = acc;

    for (std::size_t i = 0; i < layer.in_ch; ++i) {
      auto in = x.channel(i);
      auto gi = grads.input.channel(i);
      for (int ky = 0; ky < 3; ++ky) {
        const Span1 ry = valid_range(H, ky - 1);
        for (int kx = 0; kx < 3; ++kx) {
          const Span1 rx = valid_range(W, kx - 1);
          for (int kt = 0; kt < 3; ++kt) {
            const Span1 rt = valid_range(T, kt - 1);
            const double w = layer.weight(o, i, ky, kx, kt);
            const std::ptrdiff_t shift = ((ky - 1) * static_cast<std::ptrdiff_t>(W) + (kx - 1)) *
                                             static_cast<std::ptrdiff_t>(T) +
                                         (kt - 1);
            double gw = 0.0;
            for (std::size_t y = ry.begin; y < ry.end; ++y) {
              for (std::size_t xx = rx.begin; xx < rx.end; ++xx) {
                const std::size_t base = (y * W + xx) * T;
                const double* gsrc = go.data() + base;
                const double* src = in.data() + static_cast<std::ptrdiff_t>(base) + shift;
                double* gdst = gi.data() + static_cast<std::ptrdiff_t>(base) + shift;
                for (std::size_t f = rt.begin; f < rt.end; ++f) {
                  gw += gsrc[f] * src[f];
                  gdst[f] += w * gsrc[f];
                }
              }
            }
            grads.weights[((o * layer.in_ch + i) * 3 + static_cast<std::size_t>(ky)) * 9 +
                          static_cast<std::size_t>(kx) * 3 + static_cast<std::size_t>(kt)] = gw;
          }
        }
      }
    }
  }
  return grads;
}

void TransformStack::validate() const {
  if (layers.empty()) throw InvalidArgument("transform stack has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].validate();
    if (k > 0 && layers[k].in_ch != layers[k - 1].out_ch) {
      throw InvalidArgument("transform stack: layer " + std::to_string(k) + " expects " +
                            std::to_string(layers[k].in_ch) + " channels but receives " +
                            std::to_string(layers[k - 1].out_ch));
    }
  }
}

TransformStack init_stack(std::size_t in, std::size_t hidden, std::size_t out, std::size_t depth,
                          std::uint64_t seed) {
  if (depth == 0) throw InvalidArgument("transform stack depth must be positive");
  TransformStack stack;
  std::seed_seq seq{seed, std::uint64_t{0x5eed}};
  std::vector<std::uint64_t> seeds(depth);
  seq.generate(seeds.begin(), seeds.end());
  for (std::size_t k = 0; k < depth; ++k) {
    const std::size_t ci = k == 0 ? in : hidden;
    const std::size_t co = k + 1 == depth ? out : hidden;
    const Activation act = k + 1 == depth ? Activation::linear : Activation::relu;
    stack.layers.push_back(init_conv_layer(ci, co, act, seeds[k]));
  }
  return stack;
}

namespace {

Conv3dLayer identity_layer(std::size_t nc, Activation act) {
  Conv3dLayer layer(nc, nc, act);
  for (std::size_t c = 0; c < nc; ++c) layer.weight(c, c, 1, 1, 1) = 1.0;
  return layer;
}

}  // namespace

IdentityStacks identity_stacks(std::size_t nc, std::size_t analysis_depth, std::size_t synthesis_depth) {
  if (nc < 4) throw InvalidArgument("identity stacks need at least 4 channels, got " + std::to_string(nc));
  if (analysis_depth == 0 || synthesis_depth == 0) {
    throw InvalidArgument("transform stack depth must be positive");
  }
  IdentityStacks s;
  Conv3dLayer split(2, nc, analysis_depth == 1 ? Activation::linear : Activation::relu);
  split.weight(0, 0, 1, 1, 1) = 1.0;
  split.weight(1, 0, 1, 1, 1) = -1.0;
  split.weight(2, 1, 1, 1, 1) = 1.0;
  split.weight(3, 1, 1, 1, 1) = -1.0;
  s.analysis.layers.push_back(split);
  for (std::size_t k = 1; k < analysis_depth; ++k) {
    s.analysis.layers.push_back(identity_layer(nc, k + 1 == analysis_depth ? Activation::linear : Activation::relu));
  }

  for (std::size_t k = 0; k + 1 < synthesis_depth; ++k) {
    s.synthesis.layers.push_back(identity_layer(nc, Activation::relu));
  }
  // Without any ReLU the two channels carry u and -u, so their difference is 2u.
  const double w = analysis_depth == 1 && synthesis_depth == 1 ? 0.5 : 1.0;
  Conv3dLayer merge(nc, 2, Activation::linear);
  merge.weight(0, 0, 1, 1, 1) = w;
  merge.weight(0, 1, 1, 1, 1) = -w;
  merge.weight(1, 2, 1, 1, 1) = w;
  merge.weight(1, 3, 1, 1, 1) = -w;
  s.synthesis.layers.push_back(merge);
  return s;
}

StackOutput stack_forward(const ChannelTensor& x, const TransformStack& stack) {
  stack.validate();
  StackOutput result{x, StackCache{}};
  result.cache.layers.reserve(stack.layers.size());
  for (const Conv3dLayer& layer : stack.layers) {
    ConvOutput step = conv3d_forward(result.out, layer);
    result.out = std::move(step.out);
    result.cache.layers.push_back(std::move(step.cache));
  }
  return result;
}

StackGradients stack_backward(const ChannelTensor& grad_out, const StackCache& cache,
                              const TransformStack& stack) {
  if (cache.layers.size() != stack.layers.size()) {
    throw InvalidArgument("stack backward: cache has " + std::to_string(cache.layers.size()) +
                          " layers, stack has " + std::to_string(stack.layers.size()));
  }
  StackGradients grads{grad_out, std::vector<ConvGradients>(stack.layers.size())};
  for (std::size_t k = stack.layers.size(); k-- > 0;) {
    ConvGradients g = conv3d_backward(grads.input, cache.layers[k], stack.layers[k]);
    grads.input = std::move(g.input);
    grads.layers[k].weights = std::move(g.weights);
    grads.layers[k].bias = std::move(g.bias);
  }
  return grads;
}

}  // namespace dus
