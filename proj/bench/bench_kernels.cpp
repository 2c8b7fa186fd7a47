// Serial reference against the OpenMP kernels. Thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "trends/inference.hpp"
#include "trends/isotonic.hpp"
#include "trends/trend_fit.hpp"

using namespace trends;

namespace {

QuantileData make_data(int L, int per_level, int P, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<int> levels;
  std::vector<std::vector<double>> rows;
  for (int l = 1; l <= L; ++l)
    for (int i = 0; i < per_level; ++i) {
      std::vector<double> r(static_cast<std::size_t>(P - 1));
      double c = n(rng) + 0.2 * l;
      for (double& v : r) v = c += std::fabs(n(rng)) * 0.1;
      rows.push_back(r);
      levels.push_back(l);
    }
  return make_quantile_data(default_grid(P), levels, std::vector<double>(levels.size(), 1.0), rows);
}

Execution exec(const benchmark::State& s) { return s.range(0) ? Execution::parallel : Execution::serial; }

void BM_TrendSearch(benchmark::State& state) {
  auto d = make_data(6, 2, static_cast<int>(state.range(1)), 1);
  FitOptions o;
  o.execution = exec(state);
  o.search = state.range(2) ? SearchMode::bounded : SearchMode::exhaustive;
  for (auto _ : state) benchmark::DoNotOptimize(fit_trends(d, o).objective);
}
BENCHMARK(BM_TrendSearch)
    ->ArgNames({"parallel", "P", "bounded"})
    ->ArgsProduct({{0, 1}, {20, 100}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

void BM_PermutationTest(benchmark::State& state) {
  auto d = make_data(5, 1, 100, 2);
  PermutationOptions o;
  o.n_perm = 200;
  o.seed = 3;
  o.execution = exec(state);
  auto stat = trends_statistic();
  for (auto _ : state) benchmark::DoNotOptimize(permutation_test(d, stat, o).p_raw);
}
BENCHMARK(BM_PermutationTest)->ArgNames({"parallel"})->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KsBaseline(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<BatchObservation> b;
  for (int l = 1; l <= 5; ++l) {
    BatchObservation o{l, 1.0, std::vector<double>(1000)};
    for (double& v : o.samples) v = n(rng);
    b.push_back(std::move(o));
  }
  BaselineOptions o;
  o.n_perm = 100;
  o.execution = exec(state);
  for (auto _ : state) benchmark::DoNotOptimize(ks_baseline(b, o).p_raw);
}
BENCHMARK(BM_KsBaseline)->ArgNames({"parallel"})->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Pava(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<double> y(static_cast<std::size_t>(state.range(0))), w(y.size(), 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = n(rng) + 1e-3 * static_cast<double>(i);
  for (auto _ : state) benchmark::DoNotOptimize(pava(y, w).data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Pava)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oN);

}  // namespace

BENCHMARK_MAIN();
