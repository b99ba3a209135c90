#include <benchmark/benchmark.h>

#include <random>

#include "ccgym/envgym.hpp"
#include "ccgym/simnet.hpp"

using namespace ccgym;

static void BM_NetSimTick(benchmark::State& state) {
  const bool fat = state.range(0) != 0;
  const Topology t = fat ? build_fattree(4, 10e6) : build_dumbbell(4, 10e6);
  std::vector<FlowEndpoints> flows;
  const int n = t.num_hosts();
  for (int h = 0; h < n; ++h) flows.push_back({HostId{h}, HostId{(h + n / 2) % n}});
  NetSim net(t, flows, 1e-3, 10e6);
  std::vector<std::int64_t> offers(flows.size(), 1250);
  TickReport report;
  for (auto _ : state) {
    net.advance(net.admit(offers), report);
    benchmark::DoNotOptimize(report.port_queue.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NetSimTick)->Arg(0)->Arg(1)->ArgName("fattree");

static void BM_EnvStep(benchmark::State& state) {
  EnvConfig c;
  c.transport = static_cast<TransportKind>(state.range(0));
  Environment env(c);
  env.reset();
  std::vector<double> a(static_cast<std::size_t>(env.num_hosts()), 0.5);
  for (auto _ : state) {
    auto r = env.step(a);
    if (r.done) env.reset();
    benchmark::DoNotOptimize(r.reward.total);
  }
}
BENCHMARK(BM_EnvStep)->DenseRange(0, 2)->ArgName("transport")->Unit(benchmark::kMicrosecond);
