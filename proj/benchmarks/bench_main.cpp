// Microbenchmarks for the hot paths: polynomial evaluation, the generator,
// the closed-form bound, power iteration at full network scale, and a short
// closed-loop simulation burst.

#include <benchmark/benchmark.h>

#include "../tests/helpers.hpp"
#include "shsbarrier/compose.hpp"
#include "shsbarrier/generator.hpp"
#include "shsbarrier/probability.hpp"
#include "shsbarrier/sim.hpp"

using namespace shs;
using namespace shstest;

static void BM_PolyEvalDegree6(benchmark::State& state) {
  Polynomial p = reference_certificate_task1().modes[0].barrier;
  std::vector<double> x{1.234};
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.eval(x));
  }
}
BENCHMARK(BM_PolyEvalDegree6);

static void BM_PolyMulDegree6(benchmark::State& state) {
  Polynomial p = reference_certificate_task1().modes[0].barrier;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p * p);
  }
}
BENCHMARK(BM_PolyMulDegree6);

static void BM_GeneratorDegree6(benchmark::State& state) {
  Subsystem sub = kuramoto_subsystem(10, false);
  Polynomial b = reference_certificate_task1().modes[0].barrier;
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_generator(sub, 0, b));
  }
}
BENCHMARK(BM_GeneratorDegree6);

static void BM_ReachBound(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(reach_bound({320.0, 430000.0, 5200.0, 5e-7, 5.0}));
  }
}
BENCHMARK(BM_ReachBound);

static void BM_PowerIteration100(benchmark::State& state) {
  const int n = 100;
  std::vector<double> lambda(n, 5e-5);
  Matrix delta(n, std::vector<double>(n, 5e-7));
  for (int i = 0; i < n; ++i) delta[i][i] = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(check_small_gain_matrices(lambda, delta));
  }
}
BENCHMARK(BM_PowerIteration100);

static void BM_SimulateBurst(benchmark::State& state) {
  Network net = kuramoto_network(10, false);
  Labeling lab = kuramoto_labeling(net);
  Dfa dfa = kuramoto_complement();
  HybridPolicy policy;
  policy.automaton = build_switching_automaton(dfa);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 0.1;
  cfg.trajectories = 8;
  cfg.seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate(net, policy, lab, dfa, lab.regions.at("p1"), cfg));
  }
}
BENCHMARK(BM_SimulateBurst);

BENCHMARK_MAIN();
