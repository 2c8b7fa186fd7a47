#include "trends/experiments.hpp"

#include <algorithm>
#include <memory>
#include <string>

#include "trends/effect_stats.hpp"
#include "trends/error.hpp"
#include "trends/rng.hpp"
#include "trends/wasserstein.hpp"

namespace trends {

namespace {

constexpr int kGridSize = 100;

TestResult run_method(TestMethod m, const SimDataset& ds, const GridPtr& grid, int n_perm,
                      std::uint64_t perm_seed) {
  switch (m) {
    case TestMethod::trends:
    case TestMethod::linear_trends: {
      PermutationOptions po;
      po.n_perm = n_perm;
      po.seed = perm_seed;
      const auto stat = m == TestMethod::trends ? trends_statistic() : linear_trends_statistic();
      return permutation_test(make_quantile_data(ds.batches, grid), stat, po, m);
    }
    case TestMethod::ks:
    case TestMethod::mi: {
      BaselineOptions bo;
      bo.n_perm = n_perm;
      bo.seed = perm_seed;
      return m == TestMethod::ks ? ks_baseline(ds.batches, bo) : mi_baseline(ds.batches, bo);
    }
  }
  throw PreconditionError("unknown method");
}

template <typename F>
void for_each_index(std::size_t n, Execution exec, F&& f) {
  const auto N = static_cast<std::ptrdiff_t>(n);
  if (exec == Execution::parallel) {
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < N; ++i) {
      try {
        f(static_cast<std::size_t>(i));
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
    for (const auto& e : errors)
      if (!e.empty()) throw Error(e);
  } else {
    for (std::ptrdiff_t i = 0; i < N; ++i) f(static_cast<std::size_t>(i));
  }
}

}  // namespace

std::vector<MethodMetrics> run_table1(const Table1Config& cfg) {
  const GridPtr grid = default_grid(kGridSize);
  struct Job {
    SimModel model;
    std::uint64_t index;
  };
  std::vector<Job> jobs;
  for (auto [m, count] : {std::pair{SimModel::S1, cfg.s1}, std::pair{SimModel::S2, cfg.s2},
                          std::pair{SimModel::S3, cfg.s3}})
    for (int i = 0; i < count; ++i) jobs.push_back({m, static_cast<std::uint64_t>(i)});
  const std::size_t D = jobs.size(), M = cfg.methods.size();
  // One shared permutation stream for every data set so that minP sees the
  // same shuffles across the family.
  const std::uint64_t perm_seed = stream_seed(cfg.seed, {0x7065726dULL});
  std::vector<TestResult> results(D * M);
  for_each_index(D, cfg.execution, [&](std::size_t d) {
    SimSpec spec;
    spec.model = jobs[d].model;
    spec.n = cfg.n;
    spec.sigma = cfg.sigma;
    spec.seed = dataset_seed(cfg.seed, jobs[d].model, jobs[d].index);
    const SimDataset ds = generate(spec, grid);
    for (std::size_t j = 0; j < M; ++j) results[d * M + j] = run_method(cfg.methods[j], ds, grid, cfg.n_perm, perm_seed);
  });

  std::unique_ptr<bool[]> labels(new bool[D]);
  for (std::size_t d = 0; d < D; ++d) labels[d] = model_trending(jobs[d].model);
  std::span<const bool> lab(labels.get(), D);
  std::vector<MethodMetrics> out;
  for (std::size_t j = 0; j < M; ++j) {
    std::vector<double> p(D), stat(D);
    std::vector<std::vector<double>> pmat(D);
    for (std::size_t d = 0; d < D; ++d) {
      const auto& r = results[d * M + j];
      p[d] = r.p_raw;
      stat[d] = r.statistic;
      if (cfg.minp) pmat[d] = permutation_pvalues(r.statistic, r.null_statistics);
    }
    MethodMetrics mm{cfg.methods[j], classification_metrics(p, lab, stat, cfg.alpha), {}};
    mm.adjusted = cfg.minp ? classification_metrics(stepdown_minp(pmat, p), lab, stat, cfg.alpha) : mm.raw;
    out.push_back(mm);
  }
  return out;
}

std::vector<ConvergenceRow> run_convergence(const ConvergenceConfig& cfg) {
  const GridPtr grid = default_grid(kGridSize);
  std::vector<ConvergenceRow> rows;
  for (int n : cfg.ns)
    for (int npl : cfg.per_level) {
      double et = 0.0, ee = 0.0;
      for (int r = 0; r < cfg.reps; ++r) {
        SimSpec spec;
        spec.model = cfg.model;
        spec.n = n;
        spec.n_per_level = npl;
        spec.sigma = cfg.sigma;
        spec.seed = stream_seed(cfg.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(npl),
                                           static_cast<std::uint64_t>(r)});
        const SimDataset ds = generate(spec, grid);
        const QuantileData data = make_quantile_data(ds.batches, grid);
        const TrendFit fit = fit_trends(data);
        et += wasserstein_error(fit.fitted, ds.truth);
        std::vector<QuantileFunction> emp;
        for (int l = 1; l <= model_levels(cfg.model); ++l) {
          std::vector<QuantileFunction> members;
          for (std::size_t i = 0; i < data.batches(); ++i)
            if (data.levels[i] == l) members.emplace_back(grid, std::vector<double>(data.row(i).begin(), data.row(i).end()));
          emp.push_back(wasserstein_mean(members));
        }
        ee += wasserstein_error(emp, ds.truth);
      }
      rows.push_back({n, npl, et / cfg.reps, ee / cfg.reps});
    }
  return rows;
}

std::vector<PvalueRow> run_pvalue_study(const PvalueStudyConfig& cfg) {
  const GridPtr grid = default_grid(kGridSize);
  const Statistic stat = trends_statistic();
  std::vector<PvalueRow> rows;
  for (SimModel m : cfg.models) {
    const auto D = static_cast<std::size_t>(cfg.datasets);
    std::vector<double> observed(D), p_smooth(D), p_perm(D);
    for_each_index(D, cfg.execution, [&](std::size_t d) {
      SimSpec spec;
      spec.model = m;
      spec.n = cfg.n;
      spec.sigma = cfg.sigma;
      spec.seed = dataset_seed(cfg.seed, m, d);
      const SimDataset ds = generate(spec, grid);
      PermutationOptions po;
      po.exhaustive = true;
      const TestResult plain = permutation_test(make_quantile_data(ds.batches, grid), stat, po);
      SmoothedOptions so;
      so.min_null = cfg.min_null;
      so.seed = stream_seed(cfg.seed, {0x736d6fULL, static_cast<std::uint64_t>(m), d});
      const TestResult smooth = smoothed_permutation_test(ds.batches, grid, stat, so);
      observed[d] = plain.statistic;
      p_perm[d] = plain.p_raw;
      p_smooth[d] = smooth.p_raw;
    });

    // Oracle: fresh data sets from the same model with shuffled labels.
    std::vector<long> exceed(D, 0);
    long drawn = 0;
    long target = cfg.oracle_min;
    const std::uint64_t oracle_seed = stream_seed(cfg.seed, {0x6f7261636c65ULL, static_cast<std::uint64_t>(m)});
    for (;;) {
      const auto chunk = static_cast<std::size_t>(target - drawn);
      std::vector<double> null(chunk);
      for_each_index(chunk, cfg.execution, [&](std::size_t c) {
        const auto j = static_cast<std::uint64_t>(drawn) + c;
        SimSpec spec;
        spec.model = m;
        spec.n = cfg.n;
        spec.sigma = cfg.sigma;
        spec.seed = stream_seed(oracle_seed, {j});
        const SimDataset ds = generate(spec, grid);
        QuantileData data = make_quantile_data(ds.batches, grid);
        data.levels = permuted_levels(data.levels, oracle_seed, j);
        null[c] = stat(data);
      });
      for (double v : null)
        for (std::size_t d = 0; d < D; ++d) exceed[d] += at_least(v, observed[d]);
      drawn = target;
      const bool enough = std::all_of(exceed.begin(), exceed.end(), [&](long e) { return e >= cfg.oracle_exceed; });
      if (enough || drawn >= cfg.oracle_max) break;
      target = std::min(cfg.oracle_max, 2 * drawn);
    }
    PvalueRow row{m, 0.0, 0.0, 0.0, drawn};
    for (std::size_t d = 0; d < D; ++d) {
      const double p = static_cast<double>(1 + exceed[d]) / static_cast<double>(1 + drawn);
      row.mean_oracle += p / static_cast<double>(D);
      row.mse_smoothed += (p_smooth[d] - p) * (p_smooth[d] - p) / static_cast<double>(D);
      row.mse_perm += (p_perm[d] - p) * (p_perm[d] - p) / static_cast<double>(D);
    }
    rows.push_back(row);
  }
  return rows;
}

MisspecRow run_misspec(const MisspecConfig& cfg) {
  const GridPtr grid = default_grid(kGridSize);
  const double truth = true_delta(SimModel::R3);
  MisspecRow row{cfg.sigma, 0.0, 0.0};
  for (int d = 0; d < cfg.datasets; ++d) {
    SimSpec spec;
    spec.model = SimModel::R3;
    spec.n = cfg.n;
    spec.sigma = cfg.sigma;
    spec.seed = dataset_seed(cfg.seed, SimModel::R3, static_cast<std::uint64_t>(d));
    const SimDataset ds = generate(spec, grid);
    const QuantileData data = make_quantile_data(ds.batches, grid);
    const double dt = path_length(fit_trends(data));
    const double de = delta_emp(data);
    row.mse_trends += (dt - truth) * (dt - truth) / cfg.datasets;
    row.mse_emp += (de - truth) * (de - truth) / cfg.datasets;
  }
  return row;
}

}  // namespace trends
