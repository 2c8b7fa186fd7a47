#include "trends/simgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "trends/error.hpp"
#include "trends/rng.hpp"
#include "trends/trend_fit.hpp"
#include "trends/wasserstein.hpp"

namespace trends {

namespace {

constexpr std::array<double, 5> kS1Prob{0.3, 0.3, 0.4, 0.5, 0.8};
constexpr std::array<double, 5> kS2Lambda{0.1, 0.4, 0.8, 0.8, 0.8};
constexpr std::array<double, 7> kR2Mean{0, 0.1, 0.1, 0.2, 0.5, 0.9, 1.0};
constexpr std::array<double, 7> kR3Mean{0, 0.1, 0.3, 0.5, 0.4, 0.2, 0};
constexpr double kR = 5.0;

bool s_model(SimModel m) { return m == SimModel::S1 || m == SimModel::S2 || m == SimModel::S3; }

double r_mean(SimModel m, int l) {
  switch (m) {
    case SimModel::R2: return kR2Mean[static_cast<std::size_t>(l)];
    case SimModel::R3: return kR3Mean[static_cast<std::size_t>(l)];
    default: return 0.0;
  }
}

double nb_draw(double r, double p, Rng& rng) {
  std::gamma_distribution<double> gamma(r, (1.0 - p) / p);
  const double lambda = gamma(rng);
  if (!(lambda > 0.0)) return 0.0;
  std::poisson_distribution<long long> pois(lambda);
  return static_cast<double>(pois(rng));
}

// Smallest k with cdf(k) >= u for a distribution on 0, 1, 2, ...
template <typename Pmf>
double discrete_quantile(Pmf&& pmf_step, double u) {
  double cdf = 0.0;
  for (long long k = 0;; ++k) {
    cdf += pmf_step(k);
    if (cdf >= u - 1e-12) return static_cast<double>(k);
    if (k > 100000000) throw Error("quantile search did not terminate");
  }
}

struct NbPmf {
  double r, p, cur;
  NbPmf(double r_, double p_) : r(r_), p(p_), cur(std::pow(p_, r_)) {}
  double operator()(long long k) {
    if (k == 0) return cur;
    cur *= (static_cast<double>(k - 1) + r) / static_cast<double>(k) * (1.0 - p);
    return cur;
  }
};

double normal_quantile(double u) { return boost::math::quantile(boost::math::normal(), u); }
double normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }

}  // namespace

const char* to_string(SimModel m) noexcept {
  switch (m) {
    case SimModel::S1: return "S1";
    case SimModel::S2: return "S2";
    case SimModel::S3: return "S3";
    case SimModel::R1: return "R1";
    case SimModel::R2: return "R2";
    case SimModel::R3: return "R3";
  }
  return "?";
}

SimModel parse_model(const std::string& name) {
  for (SimModel m : {SimModel::S1, SimModel::S2, SimModel::S3, SimModel::R1, SimModel::R2, SimModel::R3})
    if (name == to_string(m)) return m;
  throw PreconditionError("unknown simulation model '" + name + "'");
}

int model_levels(SimModel m) noexcept { return s_model(m) ? 5 : 7; }

bool model_trending(SimModel m) noexcept {
  return m == SimModel::S1 || m == SimModel::S2 || m == SimModel::R1 || m == SimModel::R2;
}

std::uint64_t dataset_seed(std::uint64_t run_seed, SimModel model, std::uint64_t index) {
  return stream_seed(run_seed, {0x73696dULL, static_cast<std::uint64_t>(model), index});
}

double nb_quantile(double r, double p, double u) { return discrete_quantile(NbPmf(r, p), u); }

double nb_mixture_quantile(double r, double p1, double p2, double lambda, double u) {
  NbPmf a(r, p1), b(r, p2);
  return discrete_quantile([&](long long k) { return (1.0 - lambda) * a(k) + lambda * b(k); }, u);
}

std::vector<QuantileFunction> true_quantiles(SimModel model, const GridPtr& grid) {
  const int L = model_levels(model);
  std::vector<QuantileFunction> out;
  for (int l = 0; l < L; ++l) {
    std::vector<double> v(grid->size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double u = grid->prob(k);
      switch (model) {
        case SimModel::S1: v[k] = std::log10(nb_quantile(kR, kS1Prob[static_cast<std::size_t>(l)], u) + 1.0); break;
        case SimModel::S2:
          v[k] = std::log10(nb_mixture_quantile(kR, 0.3, 0.7, kS2Lambda[static_cast<std::size_t>(l)], u) + 1.0);
          break;
        case SimModel::S3: v[k] = std::log10(nb_quantile(kR, 0.5, u) + 1.0); break;
        default: v[k] = r_mean(model, l) + normal_quantile(u); break;
      }
    }
    out.emplace_back(grid, std::move(v));
  }
  return out;
}

double true_delta(SimModel model) {
  if (s_model(model)) throw UnsupportedError("true_delta is defined for the R models");
  double d = 0.0;
  for (int l = 1; l < model_levels(model); ++l) d += std::fabs(r_mean(model, l) - r_mean(model, l - 1));
  return d;
}

SimDataset generate(const SimSpec& spec, const GridPtr& grid) {
  if (spec.n < 1) throw PreconditionError("samples per batch must be positive");
  if (spec.n_per_level < 1) throw PreconditionError("batches per level must be positive");
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) throw PreconditionError("sigma must be nonnegative");
  const int L = model_levels(spec.model);
  Rng rng(spec.seed);
  std::normal_distribution<double> std_normal;
  std::uniform_real_distribution<double> unif;
  SimDataset ds;
  for (int l = 0; l < L; ++l) {
    for (int j = 0; j < spec.n_per_level; ++j) {
      BatchObservation b;
      b.level = l + 1;
      b.samples.resize(static_cast<std::size_t>(spec.n));
      if (s_model(spec.model)) {
        const double r_noise = 10.0 * spec.sigma * std_normal(rng);
        const double p_noise = spec.sigma * std_normal(rng);
        const double r = std::max(1.0, kR + r_noise);
        auto perturb = [&](double p) { return std::clamp(p + p_noise, 0.05, 0.95); };
        if (spec.model == SimModel::S2) {
          const double p1 = perturb(0.3), p2 = perturb(0.7);
          const double lambda = kS2Lambda[static_cast<std::size_t>(l)];
          for (auto& x : b.samples) x = std::log10(nb_draw(r, unif(rng) < lambda ? p2 : p1, rng) + 1.0);
        } else {
          const double p = perturb(spec.model == SimModel::S1 ? kS1Prob[static_cast<std::size_t>(l)] : 0.5);
          for (auto& x : b.samples) x = std::log10(nb_draw(r, p, rng) + 1.0);
        }
      } else {
        const double z = spec.sigma * std_normal(rng);
        const double mu = r_mean(spec.model, l);
        for (auto& x : b.samples) x = mu + std_normal(rng) + z;
      }
      ds.batches.push_back(std::move(b));
    }
  }
  ds.truth = true_quantiles(spec.model, grid);
  return ds;
}

namespace {

void require_trend(const std::vector<QuantileFunction>& seq) {
  const std::size_t L = seq.size();
  if (L == 0) throw PreconditionError("fixture has no levels");
  const std::size_t K = seq.front().size();
  std::vector<double> v;
  v.reserve(L * K);
  for (const auto& q : seq) v.insert(v.end(), q.values().begin(), q.values().end());
  if (!is_trending(v, L, K)) throw PreconditionError("fixture parameters do not produce a trend");
}

bool monotone(std::span<const double> x) {
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < x.size(); ++i) {
    inc = inc && x[i - 1] <= x[i];
    dec = dec && x[i - 1] >= x[i];
  }
  return inc || dec;
}

}  // namespace

std::vector<QuantileFunction> stochastic_order_fixture(const QuantileFunction& base,
                                                       std::span<const double> shifts) {
  if (!monotone(shifts)) throw PreconditionError("shifts must be monotone");
  std::vector<QuantileFunction> out;
  for (double s : shifts) {
    std::vector<double> v(base.values().begin(), base.values().end());
    for (auto& x : v) x += s;
    out.emplace_back(base.grid_ptr(), std::move(v));
  }
  require_trend(out);
  return out;
}

std::vector<QuantileFunction> quantile_mixture_fixture(const QuantileFunction& first,
                                                       const QuantileFunction& last,
                                                       std::span<const double> omega) {
  if (!same_grid(first.grid(), last.grid())) throw DimensionError("endpoints use different grids");
  if (!monotone(omega)) throw PreconditionError("mixture weights must be monotone");
  for (double w : omega)
    if (!(w >= 0.0 && w <= 1.0)) throw PreconditionError("mixture weights must lie in [0, 1]");
  std::vector<QuantileFunction> out;
  for (double w : omega) {
    std::vector<double> v(first.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = w * first[k] + (1.0 - w) * last[k];
    // Convex combinations of nondecreasing vectors can lose monotonicity
    // only through rounding.
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = std::max(v[k], v[k - 1]);
    out.emplace_back(first.grid_ptr(), std::move(v));
  }
  require_trend(out);
  return out;
}

bool migration_graph_ok(const std::vector<std::vector<double>>& pi) {
  if (pi.empty()) return true;
  const std::size_t C = pi.front().size();
  // forward[k]: edge k -> k+1 present; backward[k]: edge k+1 -> k present.
  std::vector<char> forward(C, 0), backward(C, 0);
  for (std::size_t l = 1; l < pi.size(); ++l) {
    double flow = 0.0;  // mass moved from components <= k to components > k
    for (std::size_t k = 0; k + 1 < C; ++k) {
      flow += pi[l - 1][k] - pi[l][k];
      if (flow > 1e-12) forward[k] = 1;
      if (flow < -1e-12) backward[k] = 1;
    }
  }
  int doubly_fed = 0;
  for (std::size_t k = 0; k + 1 < C; ++k)
    if (forward[k] && backward[k]) return false;
  for (std::size_t node = 0; node < C; ++node) {
    const bool from_left = node > 0 && forward[node - 1];
    const bool from_right = node + 1 < C && backward[node];
    doubly_fed += from_left && from_right;
  }
  return doubly_fed <= 1;
}

std::vector<QuantileFunction> mixture_migration_fixture(const GridPtr& grid, std::span<const double> means,
                                                        double sd,
                                                        const std::vector<std::vector<double>>& pi) {
  if (means.empty()) throw PreconditionError("need at least one component");
  if (!(sd > 0.0)) throw PreconditionError("component sd must be positive");
  for (std::size_t k = 1; k < means.size(); ++k)
    if (!(means[k - 1] < means[k])) throw PreconditionError("component means must be ascending");
  for (const auto& row : pi) {
    if (row.size() != means.size()) throw DimensionError("one proportion per component required");
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw PreconditionError("proportions must be nonnegative");
      s += v;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw PreconditionError("proportions must sum to 1");
  }
  if (!migration_graph_ok(pi)) throw PreconditionError("migration graph has a cycle or several doubly-fed nodes");

  std::vector<QuantileFunction> out;
  for (const auto& row : pi) {
    auto cdf = [&](double x) {
      double c = 0.0;
      for (std::size_t k = 0; k < means.size(); ++k) c += row[k] * normal_cdf((x - means[k]) / sd);
      return c;
    };
    std::vector<double> v(grid->size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double u = grid->prob(k);
      double lo = means.front() - 40.0 * sd, hi = means.back() + 40.0 * sd;
      for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < u ? lo : hi) = mid;
      }
      v[k] = hi;
    }
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = std::max(v[k], v[k - 1]);
    out.emplace_back(grid, std::move(v));
  }
  require_trend(out);
  return out;
}

double wasserstein_error(std::span<const QuantileFunction> est, std::span<const QuantileFunction> truth) {
  if (est.size() != truth.size()) throw DimensionError("sequences differ in length");
  double total = 0.0;
  for (std::size_t l = 0; l < est.size(); ++l) {
    if (!same_grid(est[l].grid(), truth[l].grid())) throw DimensionError("sequences use different grids");
    total += wasserstein_sq(est[l].values(), truth[l].values(), est[l].grid());
  }
  return total;
}

ClassificationMetrics classification_metrics(std::span<const double> p, std::span<const bool> trending,
                                             std::span<const double> stat, double alpha) {
  if (p.size() != trending.size() || (!stat.empty() && stat.size() != p.size()))
    throw DimensionError("metric inputs differ in length");
  std::size_t pos = 0, neg = 0, tp = 0, fp = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool rej = p[i] <= alpha;
    if (trending[i]) {
      ++pos;
      tp += rej;
    } else {
      ++neg;
      fp += rej;
    }
  }
  if (pos == 0 || neg == 0) throw PreconditionError("AUROC needs both classes");
  auto s = [&](std::size_t i) { return stat.empty() ? 0.0 : stat[i]; };
  double wins = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!trending[i]) continue;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (trending[j]) continue;
      if (p[i] < p[j] || (p[i] == p[j] && s(i) > s(j))) wins += 1.0;
      else if (p[i] == p[j] && s(i) == s(j)) wins += 0.5;
    }
  }
  ClassificationMetrics m;
  m.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  m.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  m.auroc = wins / (static_cast<double>(pos) * static_cast<double>(neg));
  return m;
}

}  // namespace trends
