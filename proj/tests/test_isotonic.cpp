#include <doctest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "trends/error.hpp"
#include "trends/isotonic.hpp"

using namespace trends;

TEST_CASE("hand and oracle PAVA examples") {
  auto a = pava(std::vector<double>{3, 1, 2});
  for (double v : a) CHECK(v == doctest::Approx(2.0));
  auto b = pava(std::vector<double>{3, 1, 2}, std::vector<double>{1, 1, 100});
  auto o = oracle::project({3, 1, 2}, {1, 1, 100}, oracle::chain(3, true));
  for (std::size_t i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(o[i]).epsilon(1e-12));
  std::vector<double> mono{-1, 0, 0, 2.5};
  CHECK(pava(mono) == mono);
  CHECK(pava(std::vector<double>{5.0}) == std::vector<double>{5.0});
  CHECK(pava(std::vector<double>{}).empty());
  CHECK_THROWS_AS(pava(std::vector<double>{1, 2}, std::vector<double>{1, 0}), InvalidWeightError);
  CHECK_THROWS_AS(pava(std::vector<double>{1, 2}, std::vector<double>{1}), DimensionError);
}

TEST_CASE("weighted PAVA matches scikit-learn isotonic regression") {
  std::vector<double> y{1, 3, 2, 4, 3.5, 0.5, 6}, w{1, 2, 1, 3, 1, 0.5, 2};
  const double inc[] = {1.0, 2.6666666666666665, 2.6666666666666665, 3.5, 3.5, 3.5, 6.0};
  auto a = pava(y, w);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(a[i] == doctest::Approx(inc[i]).epsilon(1e-14));
  auto d = pava(y, w, Direction::nonincreasing);
  for (double v : d) CHECK(v == doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("nonincreasing PAVA mirrors the negated nondecreasing fit") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> y(9), neg(9), w(9);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = n(rng);
      neg[i] = -y[i];
      w[i] = u(rng);
    }
    auto a = pava(y, w, Direction::nonincreasing);
    auto b = pava(neg, w, Direction::nondecreasing);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(a[i] == -b[i]);
  }
}

TEST_CASE("PAVA preserves the weighted mean") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> y(12), w(12);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = n(rng);
      w[i] = u(rng);
    }
    auto f = pava(y, w);
    double s0 = 0, s1 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      s0 += w[i] * y[i];
      s1 += w[i] * f[i];
      if (i) CHECK(f[i - 1] <= f[i]);
    }
    CHECK(s1 == doctest::Approx(s0).epsilon(1e-12));
  }
}

TEST_CASE("pool_ties") {
  std::vector<LevelValue> ones{{1, 0.5, 2.0}, {2, -1.0, 1.0}};
  auto same = pool_ties(ones, 2);
  CHECK(same[0].value == 0.5);
  CHECK(same[0].weight == 2.0);
  CHECK(same[1].value == -1.0);
  auto p = pool_ties(std::vector<LevelValue>{{1, 0.0, 1.0}, {1, 2.0, 1.0}, {2, 5.0, 1.0}}, 2);
  CHECK(p[0].level == 1);
  CHECK(p[0].value == 1.0);
  CHECK(p[0].weight == 2.0);
  auto q = pool_ties(std::vector<LevelValue>{{1, 0.0, 1.0}, {1, 3.0, 2.0}}, 1);
  CHECK(q[0].value == 2.0);
  CHECK(q[0].weight == 3.0);
  CHECK_THROWS_AS(pool_ties(std::vector<LevelValue>{{1, 0.0, 1.0}, {3, 1.0, 1.0}}, 3), CoverageError);
  CHECK_THROWS_AS(pool_ties(std::vector<LevelValue>{{1, 0.0, 0.0}}, 1), InvalidWeightError);
}
