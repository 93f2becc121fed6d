#include <benchmark/benchmark.h>

#include "arplan/presets.hpp"
#include "arplan/simulator.hpp"
#include "arplan/tree_planner.hpp"

using namespace arplan;

namespace {

std::vector<NodeId> ids(int n) {
  std::vector<NodeId> out;
  for (int i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
  return out;
}

void BM_GenTree(benchmark::State& state, const char* preset) {
  const Topology t = presets::by_name(preset);
  for (auto _ : state) benchmark::DoNotOptimize(gentree(t, 100'000'000));
}

void BM_SimulateGenTree(benchmark::State& state, const char* preset) {
  const Topology t = presets::by_name(preset);
  const GenTreeReport rep = gentree(t, 100'000'000);
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_concurrent(rep.tasks, rep.plan.n, rep.plan.size, t));
}

void BM_SimulateCps(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Topology t = presets::single_switch(n);
  const Plan p = build_plan(PlanKind::cps(), ids(n), static_cast<Floats>(n) * 1000);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(p, t));
}

void BM_BuildRing(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const std::vector<NodeId> servers = ids(n);
  for (auto _ : state) benchmark::DoNotOptimize(build_plan(PlanKind::ring(), servers, static_cast<Floats>(n) * 1000));
}

}  // namespace

BENCHMARK_CAPTURE(BM_GenTree, sym384, "sym384")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GenTree, cdc384, "cdc384")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SimulateGenTree, sym384, "sym384")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SimulateGenTree, asy384, "asy384")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateCps)->Arg(8)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildRing)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
