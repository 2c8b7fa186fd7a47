#pragma once

// Brute-force reference solvers used only by the tests.

#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

// Edge (a, b) demands x[a] <= x[b].
using Edge = std::pair<std::size_t, std::size_t>;

// Weighted least-squares projection of y onto {x : x[a] <= x[b] for all
// edges}. Every candidate active set is turned into equalities; the optimum
// is the cheapest feasible candidate.
inline std::vector<double> project(const std::vector<double>& y, const std::vector<double>& w,
                                   const std::vector<Edge>& edges) {
  const std::size_t n = y.size(), m = edges.size();
  std::vector<double> best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> parent(n);
  std::vector<double> num(n), den(n), x(n);
  for (unsigned long mask = 0; mask < (1ul << m); ++mask) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (std::size_t e = 0; e < m; ++e)
      if (mask >> e & 1ul) {
        auto a = find(edges[e].first), b = find(edges[e].second);
        if (a != b) parent[a] = b;
      }
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      num[find(i)] += w[i] * y[i];
      den[find(i)] += w[i];
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = num[find(i)] / den[find(i)];
    bool ok = true;
    for (auto [a, b] : edges) ok = ok && x[a] <= x[b] + 1e-13;
    if (!ok) continue;
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += w[i] * (x[i] - y[i]) * (x[i] - y[i]);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

inline std::vector<Edge> chain(std::size_t n, bool increasing) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.push_back(increasing ? Edge{i, i + 1} : Edge{i + 1, i});
  return e;
}

// Rows nondecreasing plus column k nondecreasing iff inc[k].
inline std::vector<Edge> grid_edges(std::size_t L, std::size_t K, const std::vector<bool>& inc) {
  std::vector<Edge> e;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k + 1 < K; ++k) e.push_back({l * K + k, l * K + k + 1});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l + 1 < L; ++l)
      e.push_back(inc[k] ? Edge{l * K + k, (l + 1) * K + k} : Edge{(l + 1) * K + k, l * K + k});
  return e;
}

}  // namespace oracle

namespace oracle {

// Brute-force trend fit over a value lattice for L = 3 levels and K = 3
// quantiles (one batch per level): every triple of nondecreasing lattice
// rows is checked against the trend definition directly.
template <typename IsTrending>
double lattice_trend_fit(const std::vector<double>& x, const std::vector<double>& level_w,
                         const std::vector<double>& qw, const std::vector<double>& lattice,
                         IsTrending&& is_trending) {
  constexpr std::size_t L = 3, K = 3;
  std::vector<std::array<double, K>> rows;
  const std::size_t m = lattice.size();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b)
      for (std::size_t c = b; c < m; ++c) rows.push_back({lattice[a], lattice[b], lattice[c]});
  // cost[l][r]: contribution of level l taking row r.
  std::vector<std::vector<double>> cost(L, std::vector<double>(rows.size()));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double d = x[l * K + k] - rows[r][k];
        s += qw[k] * d * d;
      }
      cost[l][r] = level_w[l] * s;
    }
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> v(L * K);
  for (std::size_t r0 = 0; r0 < rows.size(); ++r0)
    for (std::size_t r1 = 0; r1 < rows.size(); ++r1) {
      const double c01 = cost[0][r0] + cost[1][r1];
      if (c01 >= best) continue;
      for (std::size_t r2 = 0; r2 < rows.size(); ++r2) {
        const double c = c01 + cost[2][r2];
        if (c >= best) continue;
        for (std::size_t k = 0; k < K; ++k) {
          v[k] = rows[r0][k];
          v[K + k] = rows[r1][k];
          v[2 * K + k] = rows[r2][k];
        }
        if (is_trending(v)) best = c;
      }
    }
  return best;
}

}  // namespace oracle
