#include <benchmark/benchmark.h>

#include "relnav/monte_carlo.hpp"
#include "relnav/oracles.hpp"

using namespace relnav;

namespace {

MonteCarloConfig bench_config(int runs) {
  MonteCarloConfig c;
  c.n_runs = runs;
  c.scenario.num_segments = 8;
  return c;
}

void BM_MonteCarloSerial(benchmark::State& state) {
  const MonteCarloConfig c = bench_config(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo_serial(c).track_overall.trans_m);
}

void BM_MonteCarloParallel(benchmark::State& state) {
  const MonteCarloConfig c = bench_config(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(c).track_overall.trans_m);
}

void BM_CovarianceOracleSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(covariance_oracle(static_cast<int>(state.range(0)), 10, 1, false).rel_frobenius);
}

void BM_CovarianceOracleParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(covariance_oracle(static_cast<int>(state.range(0)), 10, 1, true).rel_frobenius);
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CovarianceOracleSerial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CovarianceOracleParallel)->Arg(20000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
