#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "trends/error.hpp"
#include "trends/wasserstein.hpp"

using namespace trends;

namespace {
QuantileFunction constant(const GridPtr& g, double c) { return QuantileFunction(g, std::vector<double>(g->size(), c)); }
}  // namespace

TEST_CASE("hand quadrature values") {
  auto g = default_grid(100);
  CHECK(wasserstein_dist(constant(g, 0), constant(g, 1), 1) == doctest::Approx(0.99).epsilon(1e-14));
  CHECK(wasserstein_dist(constant(g, 0), constant(g, 1), 2) == doctest::Approx(std::sqrt(0.99)).epsilon(1e-14));
  auto g4 = default_grid(4);
  QuantileFunction f(g4, {0, 0, 0}), h(g4, {0, 1, 2});
  CHECK(wasserstein_dist(f, h, 1) == doctest::Approx(0.75));
  CHECK(wasserstein_dist(f, h, 2) == doctest::Approx(std::sqrt(1.25)));
  CHECK(wasserstein_dist(h, h, 1) == 0.0);
  CHECK_THROWS_AS(wasserstein_dist(f, h, 3), std::invalid_argument);
  CHECK_THROWS_AS(wasserstein_dist(f, constant(g, 0), 1), DimensionError);
}

TEST_CASE("metric axioms on random quantile functions") {
  auto g = default_grid(20);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  auto rand_qf = [&] {
    std::vector<double> v(g->size());
    double c = n(rng);
    for (auto& x : v) x = c += std::fabs(n(rng));
    return QuantileFunction(g, v);
  };
  for (int t = 0; t < 200; ++t) {
    auto a = rand_qf(), b = rand_qf(), c = rand_qf();
    for (int q : {1, 2}) {
      const double ab = wasserstein_dist(a, b, q), ba = wasserstein_dist(b, a, q);
      CHECK(ab == ba);
      CHECK(ab > 0.0);
      CHECK(wasserstein_dist(a, c, q) <= ab + wasserstein_dist(b, c, q) + 1e-12);
    }
  }
}

TEST_CASE("Wasserstein mean") {
  auto g = default_grid(5);
  std::vector<QuantileFunction> two{constant(g, 0), constant(g, 2)};
  auto m = wasserstein_mean(two);
  for (std::size_t k = 0; k < m.size(); ++k) CHECK(m[k] == 1.0);
  std::vector<QuantileFunction> one{QuantileFunction(g, {0, 1, 1, 3})};
  auto s = wasserstein_mean(one);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(s[k] == one[0][k]);
  CHECK_THROWS(wasserstein_mean(std::vector<QuantileFunction>{}));
}

TEST_CASE("the weighted mean minimizes the weighted squared distance") {
  auto g = default_grid(10);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<QuantileFunction> fs;
  std::vector<double> w{1.0, 0.5, 2.0, 1.5};
  for (int i = 0; i < 4; ++i) {
    std::vector<double> v(g->size());
    double c = n(rng);
    for (auto& x : v) x = c += std::fabs(n(rng));
    fs.emplace_back(g, v);
  }
  auto m = wasserstein_mean(fs, w);
  auto cost = [&](std::span<const double> G) {
    double s = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) s += w[i] * wasserstein_sq(fs[i].values(), G, *g);
    return s;
  };
  const double best = cost(m.values());
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> G(m.values().begin(), m.values().end());
    for (auto& x : G) x += 0.05 * n(rng);
    CHECK(cost(G) >= best);
  }
}
