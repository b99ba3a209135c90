#include <benchmark/benchmark.h>

#include "ccgym/nnkit.hpp"

using namespace ccgym;
using namespace ccgym::nn;

namespace {

Mlp make_net(int in, std::vector<int> hidden, int out, Activation act, Rng& rng) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  std::vector<Activation> acts(hidden.size(), act);
  acts.push_back(Activation::kIdentity);
  return Mlp(sizes, acts, rng);
}

}  // namespace

// Dumbbell state (6 x 6) into the policy and actor shapes.
static void BM_MlpForward(benchmark::State& state) {
  Rng rng(1);
  const bool ddpg = state.range(0) != 0;
  const Mlp net = ddpg ? make_net(36, {400, 300}, 4, Activation::kRelu, rng)
                       : make_net(36, {256, 256}, 4, Activation::kTanh, rng);
  const Mat x = Mat::Random(36, state.range(1));
  for (auto _ : state) {
    Mat y = net.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_MlpForward)->ArgsProduct({{0, 1}, {1, 64}})->ArgNames({"ddpg", "batch"});

static void BM_MlpBackward(benchmark::State& state) {
  Rng rng(1);
  const Mlp net = make_net(36, {400, 300}, 4, Activation::kRelu, rng);
  const Mat x = Mat::Random(36, state.range(0));
  const Mat dy = Mat::Ones(4, state.range(0));
  ForwardCache cache;
  net.forward(x, &cache);
  for (auto _ : state) {
    MlpGrads g = net.backward(cache, dy);
    benchmark::DoNotOptimize(g.weights.front().data());
  }
}
BENCHMARK(BM_MlpBackward)->Arg(64)->ArgName("batch");

static void BM_AdamStep(benchmark::State& state) {
  Rng rng(1);
  Mlp net = make_net(40, {400, 300}, 1, Activation::kRelu, rng);
  MlpGrads g = net.zero_grads();
  for (auto& w : g.weights) w.setConstant(1e-3);
  Adam opt(1e-3);
  for (auto _ : state) {
    opt.step(net, g);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AdamStep);
