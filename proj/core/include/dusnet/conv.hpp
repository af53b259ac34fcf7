#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dusnet/volume.hpp"

namespace dus {

enum class Activation { relu, linear };

inline constexpr std::size_t kKernelTaps = 27;

/// 3x3x3 cross-correlation over (y, x, t) with zero padding 1, stride 1.
/// weights are laid out [out][in][ky][kx][kt].
struct Conv3dLayer {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::linear;

  Conv3dLayer() = default;
  Conv3dLayer(std::size_t in, std::size_t out, Activation act)
      : in_ch(in), out_ch(out), weights(out * in * kKernelTaps), bias(out), activation(act) {}

  [[nodiscard]] double& weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx, std::size_t kt) {
    return weights[((o * in_ch + i) * 3 + ky) * 9 + kx * 3 + kt];
  }
  [[nodiscard]] double weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx, std::size_t kt) const {
    return weights[((o * in_ch + i) * 3 + ky) * 9 + kx * 3 + kt];
  }

  void validate() const;
  friend bool operator==(const Conv3dLayer&, const Conv3dLayer&) = default;
};

/// He-style uniform init, bound sqrt(6 / (in * 27)); bias zero.
Conv3dLayer init_conv_layer(std::size_t in, std::size_t out, Activation act, std::uint64_t seed);

struct ConvCache {
  ChannelTensor input;
  ChannelTensor pre_activation;
};

struct ConvOutput {
  ChannelTensor out;
  ConvCache cache;
};

ConvOutput conv3d_forward(const ChannelTensor& x, const Conv3dLayer& layer);

struct ConvGradients {
  ChannelTensor input;
  std::vector<double> weights;
  std::vector<double> bias;
};

ConvGradients conv3d_backward(const ChannelTensor& grad_out, const ConvCache& cache, const Conv3dLayer& layer);

/// Sequential composition of convolution layers.
struct TransformStack {
  std::vector<Conv3dLayer> layers;

  [[nodiscard]] std::size_t in_channels() const { return layers.front().in_ch; }
  [[nodiscard]] std::size_t out_channels() const { return layers.back().out_ch; }
  void validate() const;
  friend bool operator==(const TransformStack&, const TransformStack&) = default;
};

/// depth layers in -> hidden -> ... -> out, ReLU between layers, linear at the end.
TransformStack init_stack(std::size_t in, std::size_t hidden, std::size_t out, std::size_t depth,
                          std::uint64_t seed);

struct IdentityStacks {
  TransformStack analysis;   ///< 2 -> nc
  TransformStack synthesis;  ///< nc -> 2
};

/// Stacks with synthesis(analysis(u)) == u for any 2-channel u, also when
/// an identity shrinkage sits in between. The analysis stack writes u and -u
/// into channels {0,1} and {2,3} (requires nc >= 4); a ReLU anywhere in the
/// chain turns them into positive/negative parts that the synthesis stack
/// subtracts again.
IdentityStacks identity_stacks(std::size_t nc, std::size_t analysis_depth, std::size_t synthesis_depth);

struct StackCache {
  std::vector<ConvCache> layers;
};

struct StackOutput {
  ChannelTensor out;
  StackCache cache;
};

StackOutput stack_forward(const ChannelTensor& x, const TransformStack& stack);

struct StackGradients {
  ChannelTensor input;
  std::vector<ConvGradients> layers;  ///< input member of each entry is left empty
};

StackGradients stack_backward(const ChannelTensor& grad_out, const StackCache& cache, const TransformStack& stack);

}  // namespace dus
