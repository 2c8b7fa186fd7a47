#include "trends/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "trends/error.hpp"
#include "trends/rng.hpp"

namespace trends {

const char* to_string(TestMethod m) noexcept {
  switch (m) {
    case TestMethod::trends: return "trends";
    case TestMethod::linear_trends: return "linear";
    case TestMethod::ks: return "ks";
    case TestMethod::mi: return "mi";
  }
  return "?";
}

Statistic trends_statistic(FitOptions options) {
  return [options](const QuantileData& d) { return fit_trends(d, options).r_squared; };
}

Statistic linear_trends_statistic(std::vector<double> covariates, FitOptions options) {
  return [cov = std::move(covariates), options](const QuantileData& d) {
    return fit_linear_trends(d, cov, options).r_squared;
  };
}

bool at_least(double a, double b) noexcept {
  return a >= b - 1e-12 * std::max(1.0, std::fabs(b));
}

std::vector<int> permuted_levels(std::span<const int> levels, std::uint64_t seed, std::uint64_t b) {
  std::vector<int> out(levels.begin(), levels.end());
  Rng rng = make_stream(seed, {0x7065726dULL, b});
  shuffle(std::span<int>(out), rng);
  return out;
}

std::vector<std::vector<int>> distinct_assignments(std::span<const int> levels, std::size_t limit) {
  std::vector<int> cur(levels.begin(), levels.end());
  std::sort(cur.begin(), cur.end());
  std::vector<std::vector<int>> out;
  do {
    out.push_back(cur);
    if (out.size() > limit) break;
  } while (std::next_permutation(cur.begin(), cur.end()));
  return out;
}

namespace {

std::size_t distinct_level_count(std::span<const int> levels) {
  return std::set<int>(levels.begin(), levels.end()).size();
}

double std_normal_survival(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// Evaluates f on every label vector, once per distinct vector.
template <typename Eval>
std::vector<double> evaluate_labelings(const std::vector<std::vector<int>>& labelings, Eval&& eval,
                                       Execution exec) {
  std::map<std::vector<int>, std::size_t> index;
  std::vector<std::size_t> slot(labelings.size());
  std::vector<const std::vector<int>*> unique;
  for (std::size_t b = 0; b < labelings.size(); ++b) {
    auto [it, fresh] = index.try_emplace(labelings[b], unique.size());
    if (fresh) unique.push_back(&labelings[b]);
    slot[b] = it->second;
  }
  std::vector<double> value(unique.size());
  const auto n = static_cast<std::ptrdiff_t>(unique.size());
  if (exec == Execution::parallel) {
    std::vector<std::string> errors(unique.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t u = 0; u < n; ++u) {
      try {
        value[static_cast<std::size_t>(u)] = eval(*unique[static_cast<std::size_t>(u)]);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(u)] = e.what();
      }
    }
    for (const auto& e : errors)
      if (!e.empty()) throw Error(e);
  } else {
    for (std::ptrdiff_t u = 0; u < n; ++u)
      value[static_cast<std::size_t>(u)] = eval(*unique[static_cast<std::size_t>(u)]);
  }
  std::vector<double> out(labelings.size());
  for (std::size_t b = 0; b < labelings.size(); ++b) out[b] = value[slot[b]];
  return out;
}

}  // namespace

TestResult permutation_test(const QuantileData& data, const Statistic& statistic,
                            const PermutationOptions& options, TestMethod method) {
  validate(data);
  if (distinct_level_count(data.levels) < 2)
    throw DegenerateError("permutation test needs at least two distinct levels");
  TestResult res;
  res.method = method;
  res.statistic = statistic(data);

  std::vector<std::vector<int>> labelings;
  if (options.exhaustive) {
    labelings = distinct_assignments(data.levels);
  } else {
    if (options.n_perm < 1) throw PreconditionError("n_perm must be at least 1");
    labelings.reserve(static_cast<std::size_t>(options.n_perm));
    for (int b = 0; b < options.n_perm; ++b)
      labelings.push_back(permuted_levels(data.levels, options.seed, static_cast<std::uint64_t>(b)));
  }
  res.null_statistics = evaluate_labelings(
      labelings, [&](const std::vector<int>& lv) { return statistic(data.relabeled(lv)); },
      options.execution);
  res.null_samples = labelings.size();
  std::size_t hits = 0;
  for (double v : res.null_statistics) hits += at_least(v, res.statistic);
  res.p_raw = options.exhaustive
                  ? static_cast<double>(hits) / static_cast<double>(labelings.size())
                  : static_cast<double>(hits + 1) / static_cast<double>(labelings.size() + 1);
  return res;
}

double cdf_bandwidth(std::span<const double> x) {
  constexpr double floor_h = 1e-6;
  const std::size_t n = x.size();
  if (n < 2) return floor_h;
  const double dn = static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / dn;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (dn - 1.0));
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  auto quant = [&](double p) {
    const double h = (dn - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  const double iqr = quant(0.75) - quant(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  const double silverman = 1.06 * spread * std::pow(dn, -0.2);
  if (!(silverman > 0.0)) return floor_h;

  // Pilot estimates of int f^2 and int f'^2 f with a Gaussian kernel of
  // bandwidth g.
  const double g = silverman;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double int_f2 = 0.0;
  const double g2 = g * std::numbers::sqrt2;
  for (std::size_t i = 0; i < n; ++i) {
    int_f2 += inv_sqrt_2pi / g2;  // i == j
    for (std::size_t j = i + 1; j < n; ++j) {
      const double u = (s[i] - s[j]) / g2;
      if (u < -40.0) break;
      int_f2 += 2.0 * inv_sqrt_2pi * std::exp(-0.5 * u * u) / g2;
    }
  }
  int_f2 /= dn * dn;
  double int_fp2f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = (s[i] - s[j]) / g;
      if (std::fabs(u) > 40.0) continue;
      d -= u * inv_sqrt_2pi * std::exp(-0.5 * u * u);
    }
    d /= dn * g * g;
    int_fp2f += d * d;
  }
  int_fp2f /= dn;
  const double h = std::cbrt(int_f2 / std::sqrt(std::numbers::pi) / (dn * int_fp2f));
  if (!std::isfinite(h) || !(h > 0.0)) return std::max(silverman, floor_h);
  return std::max(h, floor_h);
}

double kernel_survival(std::span<const double> sample, double h, double x) {
  double acc = 0.0;
  for (double v : sample) acc += std_normal_survival((x - v) / h);
  return acc / static_cast<double>(sample.size());
}

double kernel_cdf(std::span<const double> sample, double h, double x) {
  double acc = 0.0;
  for (double v : sample) acc += std_normal_survival((v - x) / h);
  return acc / static_cast<double>(sample.size());
}

TestResult smoothed_permutation_test(std::span<const BatchObservation> batches, const GridPtr& grid,
                                     const Statistic& statistic, const SmoothedOptions& options,
                                     TestMethod method) {
  if (options.min_null < 1) throw PreconditionError("min_null must be at least 1");
  const QuantileData data = make_quantile_data(batches, grid, options.quantile_method);
  if (distinct_level_count(data.levels) < 2)
    throw DegenerateError("permutation test needs at least two distinct levels");

  std::vector<int> reversed(data.levels);
  for (int& l : reversed) l = data.L + 1 - l;
  auto excluded = [&](const std::vector<int>& lv) { return lv == data.levels || lv == reversed; };

  std::vector<std::string> warnings;
  std::vector<std::vector<int>> assignments;
  auto all = distinct_assignments(data.levels, options.max_assignments + 2);
  if (all.size() <= options.max_assignments + 2) {
    for (auto& a : all)
      if (!excluded(a)) assignments.push_back(std::move(a));
  } else {
    warnings.push_back("too many label assignments to enumerate; sampled " +
                       std::to_string(options.max_assignments) + " at random");
    for (std::uint64_t b = 0; assignments.size() < options.max_assignments; ++b) {
      auto lv = permuted_levels(data.levels, options.seed, b);
      if (!excluded(lv)) assignments.push_back(std::move(lv));
    }
  }
  if (assignments.empty()) {
    PermutationOptions po;
    po.n_perm = options.fallback_perms;
    po.seed = options.seed;
    po.execution = options.execution;
    TestResult res = permutation_test(data, statistic, po, method);
    res.warnings.push_back("no permutations besides identity and reversal; used the plain permutation test");
    return res;
  }

  TestResult res;
  res.method = method;
  res.warnings = std::move(warnings);
  res.statistic = statistic(data);
  const std::size_t A = assignments.size();
  const std::size_t per = (static_cast<std::size_t>(options.min_null) + A - 1) / A;
  const std::size_t total = A * per;
  const std::size_t K = grid->size();
  res.null_statistics.assign(total, 0.0);

  auto task = [&](std::size_t t) {
    const std::size_t a = t / per, k = t % per;
    Rng rng = make_stream(options.seed, {0x626f6f74ULL, a, k});
    QuantileData boot = data;
    boot.levels = assignments[a];
    std::vector<double> draw;
    for (std::size_t i = 0; i < batches.size(); ++i) {
      const auto& s = batches[i].samples;
      draw.resize(s.size());
      for (auto& v : draw) v = s[static_cast<std::size_t>(uniform_index(rng, s.size()))];
      std::sort(draw.begin(), draw.end());
      std::vector<double> q(K);
      estimate_sorted_quantiles(draw, *grid, options.quantile_method, q);
      std::copy(q.begin(), q.end(), boot.row(i).begin());
    }
    return statistic(boot);
  };
  const auto n = static_cast<std::ptrdiff_t>(total);
  if (options.execution == Execution::parallel) {
    std::vector<std::string> errors(total);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
      try {
        res.null_statistics[static_cast<std::size_t>(t)] = task(static_cast<std::size_t>(t));
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(t)] = e.what();
      }
    }
    for (const auto& e : errors)
      if (!e.empty()) throw Error(e);
  } else {
    for (std::ptrdiff_t t = 0; t < n; ++t)
      res.null_statistics[static_cast<std::size_t>(t)] = task(static_cast<std::size_t>(t));
  }
  res.null_samples = total;

  const double h = cdf_bandwidth(res.null_statistics);
  double p = kernel_survival(res.null_statistics, h, res.statistic);
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  if (!(p >= lo) || p > hi) {
    res.warnings.push_back("kernel tail probability clamped into (0, 1)");
    p = std::clamp(std::isnan(p) ? lo : p, lo, hi);
  }
  res.p_raw = p;
  return res;
}

std::vector<double> permutation_pvalues(double observed, std::span<const double> null) {
  std::vector<double> all;
  all.reserve(null.size() + 1);
  all.push_back(observed);
  all.insert(all.end(), null.begin(), null.end());
  std::vector<double> sorted(all);
  std::sort(sorted.begin(), sorted.end());
  const double M = static_cast<double>(all.size());
  std::vector<double> p(all.size());
  for (std::size_t b = 0; b < all.size(); ++b) {
    const double t = all[b];
    // Count of values v with at_least(v, t); the predicate is monotone in v.
    auto it = std::partition_point(sorted.begin(), sorted.end(),
                                   [&](double v) { return !at_least(v, t); });
    p[b] = static_cast<double>(sorted.end() - it) / M;
  }
  return p;
}

std::vector<double> stepdown_minp(const std::vector<std::vector<double>>& p_matrix,
                                  std::span<const double> observed) {
  const std::size_t m = p_matrix.size();
  if (observed.size() != m) throw DimensionError("one observed p-value per feature required");
  if (m == 0) return {};
  const std::size_t B = p_matrix.front().size();
  if (B == 0) throw DimensionError("permutation p-value matrix has no columns");
  for (const auto& row : p_matrix)
    if (row.size() != B) throw DimensionError("permutation p-value matrix is ragged");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return observed[a] < observed[b]; });
  std::vector<double> qmin(B, std::numeric_limits<double>::infinity());
  std::vector<double> step(m);
  for (std::size_t r = m; r-- > 0;) {
    const auto& row = p_matrix[order[r]];
    for (std::size_t b = 0; b < B; ++b) qmin[b] = std::min(qmin[b], row[b]);
    const double pj = observed[order[r]];
    std::size_t count = 0;
    for (double q : qmin) count += q <= pj;
    step[r] = static_cast<double>(count) / static_cast<double>(B);
  }
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    running = std::max(running, step[r]);
    adjusted[order[r]] = std::min(1.0, running);
  }
  return adjusted;
}

namespace {

// Samples pooled across batches, grouped by distinct value; labels[c] is the
// level of sample c in the original order.
struct Cells {
  int L = 0;
  std::vector<double> values;     // distinct, ascending
  std::vector<std::size_t> group; // per sample
  std::vector<int> labels;        // per sample
  std::vector<std::size_t> level_size;
};

Cells make_cells(std::span<const BatchObservation> batches) {
  Cells c;
  for (const auto& b : batches) {
    if (b.level < 1) throw CoverageError("levels must be positive");
    c.L = std::max(c.L, b.level);
  }
  c.level_size.assign(static_cast<std::size_t>(c.L), 0);
  std::vector<double> all;
  for (const auto& b : batches)
    for (double v : b.samples) {
      if (!std::isfinite(v)) throw PreconditionError("samples must be finite");
      all.push_back(v);
      c.labels.push_back(b.level);
      ++c.level_size[static_cast<std::size_t>(b.level - 1)];
    }
  for (std::size_t l = 0; l < c.level_size.size(); ++l)
    if (c.level_size[l] == 0) throw CoverageError("level " + std::to_string(l + 1) + " has no samples");
  if (c.L < 2) throw DegenerateError("baseline tests need at least two levels");
  c.values = all;
  std::sort(c.values.begin(), c.values.end());
  c.values.erase(std::unique(c.values.begin(), c.values.end()), c.values.end());
  c.group.resize(all.size());
  for (std::size_t i = 0; i < all.size(); ++i)
    c.group[i] = static_cast<std::size_t>(std::lower_bound(c.values.begin(), c.values.end(), all[i]) - c.values.begin());
  return c;
}

// counts[l * G + g]
std::vector<double> level_counts(const Cells& c, std::span<const int> labels) {
  const std::size_t G = c.values.size();
  std::vector<double> counts(static_cast<std::size_t>(c.L) * G, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    counts[static_cast<std::size_t>(labels[i] - 1) * G + c.group[i]] += 1.0;
  return counts;
}

double ks_from_counts(const Cells& c, const std::vector<double>& counts) {
  const std::size_t G = c.values.size(), L = static_cast<std::size_t>(c.L);
  std::vector<double> cdf(L * G);
  for (std::size_t l = 0; l < L; ++l) {
    double acc = 0.0;
    const double n = static_cast<double>(c.level_size[l]);
    for (std::size_t g = 0; g < G; ++g) {
      acc += counts[l * G + g];
      cdf[l * G + g] = acc / n;
    }
  }
  double best = 0.0;
  for (std::size_t a = 0; a < L; ++a)
    for (std::size_t b = a + 1; b < L; ++b)
      for (std::size_t g = 0; g < G; ++g)
        best = std::max(best, std::fabs(cdf[a * G + g] - cdf[b * G + g]));
  return best;
}

double mi_from_counts(const Cells& c, const std::vector<double>& counts, int grid_points) {
  const std::size_t G = c.values.size(), L = static_cast<std::size_t>(c.L);
  const double lo = c.values.front(), hi = c.values.back();
  const double range = hi - lo;
  if (!(range > 0.0)) return 0.0;
  const auto M = static_cast<std::size_t>(grid_points);
  // Cell c covers (b[c], b[c+1]) with open end cells.
  std::vector<double> bound(M + 1);
  bound[0] = -std::numeric_limits<double>::infinity();
  bound[M] = std::numeric_limits<double>::infinity();
  const double step = range / static_cast<double>(M - 1);
  for (std::size_t i = 1; i < M; ++i) bound[i] = lo + (static_cast<double>(i) - 0.5) * step;

  std::vector<double> mass(L * M, 0.0), surv(M + 1);
  for (std::size_t l = 0; l < L; ++l) {
    const double n = static_cast<double>(c.level_size[l]);
    double mean = 0.0;
    for (std::size_t g = 0; g < G; ++g) mean += counts[l * G + g] * c.values[g];
    mean /= n;
    double ss = 0.0;
    for (std::size_t g = 0; g < G; ++g) ss += counts[l * G + g] * (c.values[g] - mean) * (c.values[g] - mean);
    const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double h = std::max(1.06 * sd * std::pow(n, -0.2), 1e-3 * range);
    for (std::size_t g = 0; g < G; ++g) {
      const double w = counts[l * G + g] / n;
      if (w == 0.0) continue;
      for (std::size_t i = 0; i <= M; ++i) surv[i] = std_normal_survival((bound[i] - c.values[g]) / h);
      for (std::size_t i = 0; i < M; ++i) mass[l * M + i] += w * (surv[i] - surv[i + 1]);
    }
  }
  double mi = 0.0;
  const double invL = 1.0 / static_cast<double>(L);
  for (std::size_t i = 0; i < M; ++i) {
    double pbar = 0.0;
    for (std::size_t l = 0; l < L; ++l) pbar += invL * mass[l * M + i];
    if (!(pbar > 0.0)) continue;
    for (std::size_t l = 0; l < L; ++l) {
      const double f = mass[l * M + i];
      if (f > 0.0) mi += invL * f * std::log(f / pbar);
    }
  }
  return mi;
}

template <typename Stat>
TestResult cell_permutation_test(const Cells& cells, Stat&& stat, const BaselineOptions& opt, TestMethod method) {
  if (opt.n_perm < 1) throw PreconditionError("n_perm must be at least 1");
  TestResult res;
  res.method = method;
  res.statistic = stat(level_counts(cells, cells.labels));
  res.null_statistics.assign(static_cast<std::size_t>(opt.n_perm), 0.0);
  auto one = [&](std::size_t b) {
    auto lv = permuted_levels(cells.labels, opt.seed, b);
    return stat(level_counts(cells, lv));
  };
  const auto n = static_cast<std::ptrdiff_t>(opt.n_perm);
  if (opt.execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < n; ++b)
      res.null_statistics[static_cast<std::size_t>(b)] = one(static_cast<std::size_t>(b));
  } else {
    for (std::ptrdiff_t b = 0; b < n; ++b)
      res.null_statistics[static_cast<std::size_t>(b)] = one(static_cast<std::size_t>(b));
  }
  res.null_samples = res.null_statistics.size();
  std::size_t hits = 0;
  for (double v : res.null_statistics) hits += at_least(v, res.statistic);
  res.p_raw = static_cast<double>(hits + 1) / static_cast<double>(res.null_samples + 1);
  return res;
}

}  // namespace

double ks_statistic(std::span<const BatchObservation> batches) {
  const Cells c = make_cells(batches);
  return ks_from_counts(c, level_counts(c, c.labels));
}

double mi_statistic(std::span<const BatchObservation> batches, int grid_points) {
  if (grid_points < 2) throw PreconditionError("MI needs at least two grid points");
  const Cells c = make_cells(batches);
  return mi_from_counts(c, level_counts(c, c.labels), grid_points);
}

TestResult ks_baseline(std::span<const BatchObservation> batches, const BaselineOptions& options) {
  const Cells c = make_cells(batches);
  return cell_permutation_test(
      c, [&](const std::vector<double>& counts) { return ks_from_counts(c, counts); }, options,
      TestMethod::ks);
}

TestResult mi_baseline(std::span<const BatchObservation> batches, const BaselineOptions& options) {
  if (options.grid_points < 2) throw PreconditionError("MI needs at least two grid points");
  const Cells c = make_cells(batches);
  return cell_permutation_test(
      c, [&](const std::vector<double>& counts) { return mi_from_counts(c, counts, options.grid_points); },
      options, TestMethod::mi);
}

}  // namespace trends
