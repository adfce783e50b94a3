#include <benchmark/benchmark.h>

#include "dualprice/dual.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/oracle.hpp"
#include "dualprice/pricing.hpp"
#include "dualprice/recovery.hpp"
#include "dualprice/scenarios.hpp"

using namespace dualprice;

namespace {

Scenario bench_tree(int periods) { return random_scenario(42, {periods, periods, 3, 2, 1.0}); }

UtilityPair bench_utility(bool exponential) {
  return exponential ? UtilityPair::exponential(1.0, 0.0) : UtilityPair::two_power(0.5, 1.0, 1.0);
}

void BM_SolveDual(benchmark::State& state) {
  const Scenario s = bench_tree(static_cast<int>(state.range(0)));
  const UtilityPair u = bench_utility(state.range(1) != 0);
  const DualContext ctx(s.tree);
  for (auto _ : state) benchmark::DoNotOptimize(solve_dual(ctx, u, s.endowment).value);
  state.counters["leaves"] = static_cast<double>(s.tree.num_leaves());
}
BENCHMARK(BM_SolveDual)->ArgsProduct({{1, 2, 3}, {0, 1}})->ArgNames({"T", "exp"});

void BM_RecoverPrimal(benchmark::State& state) {
  const Scenario s = bench_tree(3);
  const UtilityPair u = bench_utility(state.range(0) != 0);
  const DualSolution sol = solve_dual(s.tree, u, s.endowment);
  for (auto _ : state) benchmark::DoNotOptimize(recover_primal(s.tree, u, s.endowment, sol).value);
}
BENCHMARK(BM_RecoverPrimal)->Arg(0)->Arg(1)->ArgName("exp");

void BM_IndifferencePrice(benchmark::State& state) {
  const Scenario s = bench_tree(static_cast<int>(state.range(0)));
  const UtilityPair u = bench_utility(state.range(1) != 0);
  const DualContext ctx(s.tree);
  const RandomVariable& claim = s.claims.at("call");
  for (auto _ : state) benchmark::DoNotOptimize(indifference_price(ctx, u, s.endowment, claim));
}
BENCHMARK(BM_IndifferencePrice)->ArgsProduct({{1, 2}, {0, 1}})->ArgNames({"T", "exp"});

void BM_VertexEnumerate(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const Scenario s = random_scenario(7, {T, T, 3, 1, 1.0});
  const MartingaleConstraints c = build_constraints(s.tree);
  std::size_t count = 0;
  for (auto _ : state) {
    count = vertex_enumerate(c, 100000).size();
    benchmark::DoNotOptimize(count);
  }
  state.counters["vertices"] = static_cast<double>(count);
}
BENCHMARK(BM_VertexEnumerate)->Arg(1)->Arg(2)->Arg(3)->ArgName("T");

void BM_BruteForceDual(benchmark::State& state) {
  const Scenario s = builtin_scenario("tri1");
  const UtilityPair u = bench_utility(true);
  DualOracleOptions o;
  o.mode = OracleMode::Grid;
  o.resolution = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_dual(s.tree, u, s.endowment, o).value);
}
BENCHMARK(BM_BruteForceDual);

}  // namespace
BENCHMARK_MAIN();
