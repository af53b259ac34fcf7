#include <benchmark/benchmark.h>

#include <random>

#include "dusnet/admm.hpp"
#include "dusnet/conv.hpp"
#include "dusnet/encoding.hpp"
#include "dusnet/network.hpp"
#include "dusnet/phantom.hpp"

namespace {

using namespace dus;

Shape3T cube(const benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  return {n, n, 8};
}

void BM_EncodingForwardAdjoint(benchmark::State& state) {
  const Shape3T s = cube(state);
  const EncodingOp op(make_pseudo_radial_mask(s, 16, 1));
  const DynVolume x = generate_phantom(PhantomSpec{s, 6, 0.05, 1});
  for (auto _ : state) benchmark::DoNotOptimize(op.adjoint(op.forward(x)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.size()));
}
BENCHMARK(BM_EncodingForwardAdjoint)->Arg(32)->Arg(64)->Arg(128);

void BM_Conv3d(benchmark::State& state) {
  const Shape3T s = cube(state);
  const Conv3dLayer layer = init_conv_layer(8, 8, Activation::relu, 1);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  ChannelTensor x(8, s);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_forward(x, layer));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Conv3d)->Arg(32)->Arg(64);

void BM_AdmmReconstruct(benchmark::State& state) {
  const Shape3T s = cube(state);
  const EncodingOp op(make_pseudo_radial_mask(s, 16, 1));
  const KSpace b = op.forward(generate_phantom(PhantomSpec{s, 6, 0.05, 1}));
  AdmmConfig cfg;
  cfg.n_iters = 10;
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct(b, op, cfg));
}
BENCHMARK(BM_AdmmReconstruct)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_NetworkForward(benchmark::State& state) {
  const Shape3T s = cube(state);
  NetworkConfig cfg;
  cfg.n_phases = 3;
  cfg.nc = 8;
  const NetworkParams params = init_network(cfg, 1);
  const EncodingOp op(make_pseudo_radial_mask(s, 8, 1));
  const KSpace b = op.forward(generate_phantom(PhantomSpec{s, 6, 0.05, 1}));
  for (auto _ : state) benchmark::DoNotOptimize(network_forward(b, op, params, cfg));
}
BENCHMARK(BM_NetworkForward)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_NetworkBackward(benchmark::State& state) {
  const Shape3T s = cube(state);
  NetworkConfig cfg;
  cfg.n_phases = 3;
  cfg.nc = 8;
  const NetworkParams params = init_network(cfg, 1);
  const EncodingOp op(make_pseudo_radial_mask(s, 8, 1));
  const DynVolume gt = generate_phantom(PhantomSpec{s, 6, 0.05, 1});
  const KSpace b = op.forward(gt);
  const ForwardResult fwd = network_forward(b, op, params, cfg);
  const DynVolume g = sub(fwd.x_hat, gt);
  for (auto _ : state) benchmark::DoNotOptimize(network_backward(g, fwd, b, op, params, cfg));
}
BENCHMARK(BM_NetworkBackward)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
