#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dusnet/volume.hpp"

namespace dus {

/// Weights of the two fully connected layers that turn the pooled channel
/// magnitudes into per-channel attention. Matrices are nc x nc, row-major
/// (row = output unit).
struct AstParams {
  std::size_t nc = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  AstParams() = default;
  explicit AstParams(std::size_t channels)
      : nc(channels), w1(channels * channels), b1(channels), w2(channels * channels), b2(channels) {}

  void validate() const;
  friend bool operator==(const AstParams&, const AstParams&) = default;
};

/// w1, w2 ~ U(-1/sqrt(nc), 1/sqrt(nc)); biases zero.
AstParams init_ast_params(std::size_t nc, std::uint64_t seed);

struct AstCache {
  ChannelTensor input;
  std::vector<double> pooled;      ///< a: mean |u_c|
  std::vector<double> hidden_pre;  ///< w1 a + b1
  std::vector<double> hidden;      ///< ReLU(hidden_pre)
  std::vector<double> gate_pre;    ///< w2 hidden + b2
  std::vector<double> gate;        ///< sigmoid(gate_pre)
  std::vector<double> tau;         ///< gate * pooled
};

struct AstOutput {
  ChannelTensor out;
  AstCache cache;
};

/// Soft thresholding with channel attention: channel c of u is shrunk by
/// tau_c = sigmoid(w2 ReLU(w1 a + b1) + b2)_c * a_c, where a is the global
/// average of |u| per channel.
AstOutput ast_forward(const ChannelTensor& u, const AstParams& p);

struct AstGradients {
  ChannelTensor input;
  AstParams params;
};

/// Exact gradient through ast_forward. Subgradient convention: the
/// shrinkage derivative is 1 where |x| > tau and 0 otherwise, and sign(0) = 0.
AstGradients ast_backward(const ChannelTensor& grad_out, const AstCache& cache, const AstParams& p);

}  // namespace dus
