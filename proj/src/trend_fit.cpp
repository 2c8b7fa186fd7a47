#include "trends/trend_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "trends/effect_stats.hpp"
#include "trends/error.hpp"
#include "trends/wasserstein.hpp"

#ifdef TRENDS_HAVE_OPENMP
#include <omp.h>
#endif

namespace trends {

std::vector<Direction> DirectionConfig::directions(std::size_t K) const {
  std::vector<Direction> d(K);
  for (std::size_t k = 0; k < K; ++k) d[k] = direction(k);
  return d;
}

std::vector<DirectionConfig> enumerate_configs(std::size_t K) {
  std::vector<DirectionConfig> out;
  out.reserve(2 * (K + 1));
  for (std::size_t s = 0; s <= K; ++s) {
    out.push_back({s, Orientation::increasing_above});
    out.push_back({s, Orientation::decreasing_above});
  }
  return out;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool rows_nondecreasing(std::span<const double> v, std::size_t L, std::size_t K) {
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 1; k < K; ++k)
      if (!(v[l * K + k - 1] <= v[l * K + k])) return false;
  return true;
}

bool column_ok(std::span<const double> v, std::size_t L, std::size_t K, std::size_t k, Direction d) {
  for (std::size_t l = 1; l < L; ++l) {
    const double a = v[(l - 1) * K + k], b = v[l * K + k];
    if (d == Direction::nondecreasing ? !(a <= b) : !(a >= b)) return false;
  }
  return true;
}

// Dykstra iteration between the column constraint set (projector supplied by
// the caller) and the set of matrices with nondecreasing rows.
template <typename ColumnProjector>
ProjectionResult dykstra(std::span<const double> x0, std::size_t L, std::size_t K,
                         const QuantileGrid& grid, const ProjectionOptions& opt,
                         ColumnProjector&& project_column, bool return_column_iterate) {
  const std::size_t n = L * K;
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> y(n), y_prev(n), r(n, 0.0), s(n, 0.0), buf(std::max(L, K));
  std::vector<double> row_w(grid.weights().begin(), grid.weights().end());
  PavaWorkspace ws;
  ws.reserve(std::max(L, K));
  int t = 0;
  for (;;) {
    // Column step: y[., k] = Proj_k(x[., k] + r[., k]).
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t l = 0; l < L; ++l) buf[l] = x[l * K + k] + r[l * K + k];
      project_column(k, std::span<double>(buf.data(), L), ws);
      for (std::size_t l = 0; l < L; ++l) y[l * K + k] = buf[l];
    }
    for (std::size_t i = 0; i < n; ++i) r[i] = x[i] + r[i] - y[i];
    // Row step: x[l, .] = PAVA(y[l, .] + s[l, .]; quadrature weights).
    for (std::size_t l = 0; l < L; ++l) {
      std::span<double> row(x.data() + l * K, K);
      for (std::size_t k = 0; k < K; ++k) row[k] = y[l * K + k] + s[l * K + k];
      pava_inplace(row, row_w, Direction::nondecreasing, ws);
    }
    for (std::size_t i = 0; i < n; ++i) s[i] = y[i] + s[i] - x[i];
    ++t;
    if (opt.on_iterate) opt.on_iterate(t, y);
    if (t > 1) {
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::fabs(y[i] - y_prev[i]));
      if (change < opt.tol) break;
    }
    if (t >= opt.max_iter)
      throw ConvergenceError("alternating projections did not converge in " +
                                 std::to_string(opt.max_iter) + " iterations",
                             y, t);
    std::swap(y, y_prev);
  }
  ProjectionResult out;
  out.iterations = t;
  out.values = return_column_iterate ? y : x;
  return out;
}

// Replaces an approximate projection by the exact solution of the equality
// system its near-ties define: entries joined by (near-)equal row or column
// neighbours form one block whose value is the weighted mean of x0 over the
// block. Accepted only if the result is exactly feasible.
bool polish(std::span<const double> x0, std::span<double> z, std::size_t L, std::size_t K,
            std::span<const Direction> dirs, std::span<const double> level_w,
            const QuantileGrid& grid) {
  const std::size_t n = L * K;
  double scale = 1.0;
  for (double v : z) scale = std::max(scale, std::fabs(v));
  std::vector<std::size_t> parent(n);
  std::vector<double> num(n), den(n), cand(n);
  std::vector<std::size_t> size(n);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (double rel : {1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    const double eps = rel * scale;
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto unite = [&](std::size_t a, std::size_t b) {
      a = find(a);
      b = find(b);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    };
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t i = l * K + k;
        if (k + 1 < K && std::fabs(z[i + 1] - z[i]) <= eps) unite(i, i + 1);
        if (l + 1 < L && std::fabs(z[i + K] - z[i]) <= eps) unite(i, i + K);
      }
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t i = l * K + k, root = find(i);
        const double w = level_w[l] * grid.weight(k);
        num[root] += w * x0[i];
        den[root] += w;
      }
    std::fill(size.begin(), size.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++size[find(i)];
    // Singleton blocks keep x0 exactly; (w x)/w may round.
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t root = find(i);
      cand[i] = size[root] == 1 ? x0[i] : num[root] / den[root];
    }
    bool ok = rows_nondecreasing(cand, L, K);
    for (std::size_t k = 0; ok && k < K; ++k) ok = column_ok(cand, L, K, k, dirs[k]);
    if (ok) {
      std::copy(cand.begin(), cand.end(), z.begin());
      return true;
    }
  }
  return false;
}

}  // namespace

ProjectionResult alternating_projections(std::span<const double> x, std::size_t L,
                                         std::span<const Direction> directions,
                                         std::span<const double> level_weights,
                                         const QuantileGrid& grid,
                                         const ProjectionOptions& options) {
  const std::size_t K = grid.size();
  if (x.size() != L * K) throw DimensionError("projection input must be L x K");
  if (directions.size() != K) throw DimensionError("one direction per quantile required");
  if (level_weights.size() != L) throw DimensionError("one weight per level required");
  for (double w : level_weights)
    if (!(w > 0.0)) throw InvalidWeightError("level weights must be positive");
  if (!rows_nondecreasing(x, L, K))
    throw PreconditionError("alternating projections require nondecreasing input rows");

  auto column = [&](std::size_t k, std::span<double> v, PavaWorkspace& ws) {
    pava_inplace(v, level_weights, directions[k], ws);
  };
  ProjectionResult res = dykstra(x, L, K, grid, options, column, true);
  if (options.polish) {
    res.polished = polish(x, res.values, L, K, directions, level_weights, grid);
  }
  if (!res.polished) {
    // Column iterate may carry tiny row violations; the row iterate is an
    // exact set of quantile functions within tol of the column set.
    ProjectionOptions again = options;
    again.on_iterate = nullptr;
    res = dykstra(x, L, K, grid, again, column, false);
  }
  return res;
}

double trend_objective(const QuantileData& data, std::span<const double> candidate) {
  const std::size_t K = data.cols();
  if (candidate.size() != static_cast<std::size_t>(data.L) * K)
    throw DimensionError("candidate must be L x K");
  const auto& grid = *data.grid;
  double total = 0.0;
  for (std::size_t i = 0; i < data.batches(); ++i) {
    const auto l = static_cast<std::size_t>(data.levels[i] - 1);
    total += data.weights[i] * wasserstein_sq(data.row(i), candidate.subspan(l * K, K), grid);
  }
  return total;
}

bool is_trending(std::span<const double> v, std::size_t L, std::size_t K) {
  if (v.size() != L * K) throw DimensionError("values must be L x K");
  if (!rows_nondecreasing(v, L, K)) return false;
  // inc_ok[k] / dec_ok[k]; a split s needs one direction on [0, s) and the
  // other on [s, K).
  std::vector<char> inc(K), dec(K);
  for (std::size_t k = 0; k < K; ++k) {
    inc[k] = column_ok(v, L, K, k, Direction::nondecreasing);
    dec[k] = column_ok(v, L, K, k, Direction::nonincreasing);
    if (!inc[k] && !dec[k]) return false;
  }
  for (auto [lo, hi] : {std::pair{&dec, &inc}, std::pair{&inc, &dec}}) {
    std::size_t s = 0;
    while (s < K && (*lo)[s]) ++s;  // longest prefix in the lower direction
    bool rest = true;
    for (std::size_t k = s; k < K; ++k) rest = rest && (*hi)[k];
    if (rest) return true;
  }
  return false;
}

namespace {

struct Candidate {
  std::vector<double> values;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool exact = true;
};

// Column-only relaxation: sum_k qw_k * (weighted PAVA residual of column k).
struct ColumnBounds {
  std::vector<double> inc_prefix, dec_prefix;  // prefix sums over k, size K+1

  double bound(const DirectionConfig& c, std::size_t K) const {
    const std::size_t s = c.split_index;
    const auto& below = c.orientation == Orientation::increasing_above ? dec_prefix : inc_prefix;
    const auto& above = c.orientation == Orientation::increasing_above ? inc_prefix : dec_prefix;
    return below[s] + (above[K] - above[s]);
  }
};

ColumnBounds column_bounds(const PooledLevels& p, const QuantileGrid& grid) {
  ColumnBounds b;
  b.inc_prefix.assign(p.K + 1, 0.0);
  b.dec_prefix.assign(p.K + 1, 0.0);
  std::vector<double> col(p.L), fit(p.L);
  PavaWorkspace ws;
  for (std::size_t k = 0; k < p.K; ++k) {
    for (std::size_t l = 0; l < p.L; ++l) col[l] = p.x[l * p.K + k];
    double cost[2];
    for (int d = 0; d < 2; ++d) {
      fit = col;
      pava_inplace(fit, p.weight, d == 0 ? Direction::nondecreasing : Direction::nonincreasing, ws);
      double c = 0.0;
      for (std::size_t l = 0; l < p.L; ++l) c += p.weight[l] * (col[l] - fit[l]) * (col[l] - fit[l]);
      cost[d] = grid.weight(k) * c;
    }
    b.inc_prefix[k + 1] = b.inc_prefix[k] + cost[0];
    b.dec_prefix[k + 1] = b.dec_prefix[k] + cost[1];
  }
  return b;
}

Candidate solve_config(const PooledLevels& p, const DirectionConfig& c, const QuantileGrid& grid,
                       const FitOptions& opt) {
  ProjectionOptions po;
  po.tol = opt.tol;
  po.max_iter = opt.max_iter;
  const auto dirs = c.directions(p.K);
  ProjectionResult r = alternating_projections(p.x, p.L, dirs, p.weight, grid, po);
  Candidate out;
  out.iterations = r.iterations;
  out.exact = r.polished;
  double obj = p.within;
  for (std::size_t l = 0; l < p.L; ++l)
    for (std::size_t k = 0; k < p.K; ++k) {
      const double d = p.x[l * p.K + k] - r.values[l * p.K + k];
      obj += p.weight[l] * grid.weight(k) * d * d;
    }
  out.objective = obj;
  out.values = std::move(r.values);
  return out;
}

int thread_count() {
#ifdef TRENDS_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

TrendFit assemble(const QuantileData& data, std::vector<double> values) {
  const std::size_t K = data.cols();
  TrendFit fit;
  fit.grid = data.grid;
  for (int l = 0; l < data.L; ++l) {
    auto first = values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(l) * K);
    fit.fitted.emplace_back(data.grid, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(K)));
  }
  fit.batch_levels = data.levels;
  fit.objective = trend_objective(data, values);
  fit.residuals.resize(data.batches());
  for (std::size_t i = 0; i < data.batches(); ++i) {
    const auto& g = fit.fitted[static_cast<std::size_t>(data.levels[i] - 1)];
    auto r = data.row(i);
    fit.residuals[i].resize(K);
    for (std::size_t k = 0; k < K; ++k) fit.residuals[i][k] = r[k] - g[k];
  }
  fit.r_squared = r_squared(fit, data);
  fit.delta_stat = delta_stat(fit);
  return fit;
}

}  // namespace

TrendFit fit_trends(const QuantileData& data, const FitOptions& options) {
  validate(data);
  const PooledLevels pooled = pool_levels(data);
  const auto& grid = *data.grid;
  const auto configs = enumerate_configs(pooled.K);
  const std::size_t C = configs.size();
  std::vector<Candidate> cands(C);
  std::vector<char> evaluated(C, 0);

  if (options.search == SearchMode::exhaustive) {
    if (options.execution == Execution::parallel) {
      std::vector<std::string> errors(C);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(C); ++c) {
        try {
          cands[static_cast<std::size_t>(c)] = solve_config(pooled, configs[static_cast<std::size_t>(c)], grid, options);
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(c)] = e.what();
        }
      }
      for (const auto& e : errors)
        if (!e.empty()) throw ConvergenceError(e, {}, options.max_iter);
    } else {
      for (std::size_t c = 0; c < C; ++c) cands[c] = solve_config(pooled, configs[c], grid, options);
    }
    std::fill(evaluated.begin(), evaluated.end(), 1);
  } else {
    const ColumnBounds cb = column_bounds(pooled, grid);
    std::vector<double> lb(C);
    for (std::size_t c = 0; c < C; ++c) lb[c] = cb.bound(configs[c], pooled.K);
    std::vector<std::size_t> order(C);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lb[a] < lb[b]; });
    double best = std::numeric_limits<double>::infinity();
    const std::size_t wave = options.execution == Execution::parallel
                                 ? static_cast<std::size_t>(std::max(1, thread_count()))
                                 : 1;
    std::size_t pos = 0;
    while (pos < C && pooled.within + lb[order[pos]] <= best) {
      std::size_t end = pos;
      while (end < C && end - pos < wave && pooled.within + lb[order[end]] <= best) ++end;
      if (end - pos == 1) {
        const std::size_t c = order[pos];
        cands[c] = solve_config(pooled, configs[c], grid, options);
      } else {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(pos); j < static_cast<std::ptrdiff_t>(end); ++j) {
          const std::size_t c = order[static_cast<std::size_t>(j)];
          cands[c] = solve_config(pooled, configs[c], grid, options);
        }
      }
      for (std::size_t j = pos; j < end; ++j) {
        evaluated[order[j]] = 1;
        best = std::min(best, cands[order[j]].objective);
      }
      pos = end;
    }
  }

  // First minimum in scan order wins.
  std::size_t best_c = C;
  for (std::size_t c = 0; c < C; ++c)
    if (evaluated[c] && (best_c == C || cands[c].objective < cands[best_c].objective)) best_c = c;

  TrendFit fit = assemble(data, std::move(cands[best_c].values));
  fit.config = configs[best_c];
  fit.iterations = cands[best_c].iterations;
  fit.exact = cands[best_c].exact;
  fit.config_objectives.resize(C);
  int n_eval = 0;
  for (std::size_t c = 0; c < C; ++c) {
    fit.config_objectives[c] = evaluated[c] ? cands[c].objective : kNaN;
    n_eval += evaluated[c];
  }
  fit.configs_evaluated = n_eval;
  return fit;
}

TrendFit fit_trends(std::span<const BatchObservation> batches, const GridPtr& grid,
                    const FitOptions& options, QuantileMethod method) {
  return fit_trends(make_quantile_data(batches, grid, method), options);
}

TrendFit fit_linear_trends(const QuantileData& data, std::span<const double> covariates,
                           const FitOptions& options) {
  validate(data);
  const PooledLevels pooled = pool_levels(data);
  const std::size_t L = pooled.L;
  std::vector<double> t(L);
  if (covariates.empty()) {
    for (std::size_t l = 0; l < L; ++l) t[l] = static_cast<double>(l + 1);
  } else {
    if (covariates.size() != L) throw DimensionError("one covariate per level required");
    for (std::size_t l = 0; l < L; ++l) {
      if (!std::isfinite(covariates[l])) throw PreconditionError("covariates must be finite");
      if (l > 0 && !(covariates[l - 1] < covariates[l]))
        throw PreconditionError("covariates must be strictly increasing");
      t[l] = covariates[l];
    }
  }
  const auto& w = pooled.weight;
  double sw = 0.0, swt = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    sw += w[l];
    swt += w[l] * t[l];
  }
  const double tbar = swt / sw;
  double sxx = 0.0;
  for (std::size_t l = 0; l < L; ++l) sxx += w[l] * (t[l] - tbar) * (t[l] - tbar);

  // Weighted least-squares projection onto {a + b t}.
  auto column = [&](std::size_t, std::span<double> v, PavaWorkspace&) {
    double swv = 0.0, sxy = 0.0;
    for (std::size_t l = 0; l < L; ++l) swv += w[l] * v[l];
    const double vbar = swv / sw;
    for (std::size_t l = 0; l < L; ++l) sxy += w[l] * (t[l] - tbar) * v[l];
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    for (std::size_t l = 0; l < L; ++l) v[l] = vbar + slope * (t[l] - tbar);
  };
  ProjectionOptions po;
  po.tol = options.tol;
  po.max_iter = options.max_iter;
  ProjectionResult r = dykstra(pooled.x, L, pooled.K, *data.grid, po, column, false);
  TrendFit fit = assemble(data, std::move(r.values));
  fit.iterations = r.iterations;
  fit.configs_evaluated = 1;
  fit.exact = false;
  return fit;
}

TrendFit fit_linear_trends(std::span<const BatchObservation> batches,
                           std::span<const double> covariates, const GridPtr& grid,
                           const FitOptions& options, QuantileMethod method) {
  return fit_linear_trends(make_quantile_data(batches, grid, method), covariates, options);
}

}  // namespace trends
