#include <doctest.h>

#include <random>
#include <vector>

#include "trends/effect_stats.hpp"
#include "trends/error.hpp"
#include "trends/trend_fit.hpp"

using namespace trends;

namespace {

QuantileData fixture() {
  return make_quantile_data(default_grid(5), {1, 2, 2, 3, 3}, {1.0, 2.0, 1.0, 1.5, 0.5},
                            {{0.0, 0.5, 1.0, 2.0},
                             {0.2, 0.4, 1.5, 1.6},
                             {0.1, 0.9, 1.2, 2.5},
                             {-0.3, 0.6, 0.8, 3.0},
                             {0.5, 0.7, 0.9, 1.0}});
}

QuantileData noisy_levels(std::mt19937_64& rng, int L, int per_level, int P) {
  std::normal_distribution<double> n;
  std::vector<int> levels;
  std::vector<std::vector<double>> rows;
  for (int l = 1; l <= L; ++l)
    for (int i = 0; i < per_level; ++i) {
      std::vector<double> r(static_cast<std::size_t>(P - 1));
      double c = n(rng) + 0.3 * l;
      for (double& v : r) v = c += std::fabs(n(rng));
      rows.push_back(r);
      levels.push_back(l);
    }
  return make_quantile_data(default_grid(P), levels, std::vector<double>(levels.size(), 1.0), rows);
}

}  // namespace

TEST_CASE("R2 and delta on the solver fixture") {
  auto d = fixture();
  auto fit = fit_trends(d);
  CHECK(r_squared(fit, d) == doctest::Approx(0.23190828755656145).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(0.23190828755656145).epsilon(1e-10));
  CHECK(delta_stat(fit) == doctest::Approx(0.085).epsilon(1e-10));
  CHECK(path_length(fit) == doctest::Approx(0.255).epsilon(1e-10));
}

TEST_CASE("delta of two constant levels") {
  auto g = default_grid(100);
  std::vector<double> zero(99, 0.0), one(99, 1.0);
  auto d = make_quantile_data(g, {1, 2}, {1.0, 1.0}, {zero, one});
  auto fit = fit_trends(d);
  // d1 = sum of weights = 99/100, divided by L = 2.
  CHECK(fit.delta_stat == doctest::Approx(0.495).epsilon(1e-12));
}

TEST_CASE("empirical path length") {
  auto g = default_grid(5);
  auto d = make_quantile_data(g, {1, 2, 3}, {1, 1, 1}, {{0, 1, 2, 3}, {1, 2, 3, 4}, {0, 1, 2, 3}});
  CHECK(delta_emp(d) == doctest::Approx(1.6).epsilon(1e-12));
  auto two = make_quantile_data(g, {1, 1, 2}, {1, 1, 1}, {{0, 1, 2, 3}, {1, 2, 3, 4}, {0, 1, 2, 3}});
  CHECK_THROWS_AS(delta_emp(two), UnsupportedError);
}

TEST_CASE("R2 is invariant under level reversal and affine maps; delta scales") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    auto d = noisy_levels(rng, 4, 2, 10);
    auto fit = fit_trends(d);
    std::vector<int> rev(d.levels);
    for (int& l : rev) l = d.L + 1 - l;
    auto fr = fit_trends(d.relabeled(rev));
    CHECK(fr.r_squared == doctest::Approx(fit.r_squared).epsilon(1e-6));
    CHECK(fr.delta_stat == doctest::Approx(fit.delta_stat).epsilon(1e-6));

    auto a = d;
    for (double& v : a.quantiles) v = 2.5 * v - 7.0;
    auto fa = fit_trends(a);
    CHECK(fa.r_squared == doctest::Approx(fit.r_squared).epsilon(1e-6));
    CHECK(fa.delta_stat == doctest::Approx(2.5 * fit.delta_stat).epsilon(1e-6));
  }
}

TEST_CASE("residual table lists F - G per batch and quantile") {
  auto d = fixture();
  auto fit = fit_trends(d);
  auto rows = residual_table(fit);
  REQUIRE(rows.size() == 5 * 4);
  for (const auto& r : rows) {
    const std::size_t k = static_cast<std::size_t>(std::lround(r.prob * 5.0)) - 1;
    const auto l = static_cast<std::size_t>(r.level - 1);
    CHECK(r.level == d.levels[r.batch]);
    CHECK(r.residual == doctest::Approx(d.row(r.batch)[k] - fit.fitted[l][k]).epsilon(1e-12));
  }
}
