#include "trends/effect_stats.hpp"

#include <cmath>
#include <string>

#include "trends/error.hpp"
#include "trends/trend_fit.hpp"
#include "trends/wasserstein.hpp"

namespace trends {

double r_squared(const TrendFit& fit, const QuantileData& data) {
  const std::size_t K = data.cols();
  if (!fit.grid || !same_grid(*fit.grid, *data.grid)) throw DimensionError("fit and data use different grids");
  if (fit.levels() != static_cast<std::size_t>(data.L)) throw DimensionError("fit and data disagree on L");

  std::vector<double> mean(K, 0.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < data.batches(); ++i) wsum += data.weights[i];
  for (std::size_t i = 0; i < data.batches(); ++i) {
    auto r = data.row(i);
    for (std::size_t k = 0; k < K; ++k) mean[k] += data.weights[i] * r[k];
  }
  for (auto& m : mean) m /= wsum;

  double resid = 0.0, total = 0.0;
  for (std::size_t i = 0; i < data.batches(); ++i) {
    const auto& g = fit.fitted[static_cast<std::size_t>(data.levels[i] - 1)];
    resid += data.weights[i] * wasserstein_sq(data.row(i), g.values(), *data.grid);
    total += data.weights[i] * wasserstein_sq(data.row(i), mean, *data.grid);
  }
  if (total == 0.0) return 1.0;
  if (resid > total) {
    // The constant sequence at the pooled mean is feasible, so this can only
    // be rounding.
    if (resid - total > 1e-9 * total)
      throw Error("R^2 numerator exceeds total variation (" + std::to_string(resid) + " > " +
                  std::to_string(total) + ")");
    return 0.0;
  }
  return 1.0 - resid / total;
}

double path_length(const TrendFit& fit) {
  if (fit.fitted.empty()) return 0.0;
  return wasserstein_dist(fit.fitted.front(), fit.fitted.back(), 1);
}

double delta_stat(const TrendFit& fit) {
  if (fit.fitted.empty()) return 0.0;
  return path_length(fit) / static_cast<double>(fit.levels());
}

double delta_emp(const QuantileData& data) {
  const auto L = static_cast<std::size_t>(data.L);
  std::vector<std::size_t> row_of(L, data.batches());
  for (std::size_t i = 0; i < data.batches(); ++i) {
    const auto l = static_cast<std::size_t>(data.levels[i] - 1);
    if (row_of[l] != data.batches())
      throw UnsupportedError("delta_emp requires exactly one batch per level");
    row_of[l] = i;
  }
  for (std::size_t l = 0; l < L; ++l)
    if (row_of[l] == data.batches()) throw CoverageError("level " + std::to_string(l + 1) + " has no batch");
  double total = 0.0;
  for (std::size_t l = 1; l < L; ++l)
    total += wasserstein_dist(data.row(row_of[l - 1]), data.row(row_of[l]), *data.grid, 1);
  return total;
}

std::vector<ResidualRow> residual_table(const TrendFit& fit) {
  std::vector<ResidualRow> out;
  const std::size_t K = fit.grid ? fit.grid->size() : 0;
  out.reserve(fit.residuals.size() * K);
  for (std::size_t i = 0; i < fit.residuals.size(); ++i)
    for (std::size_t k = 0; k < K; ++k)
      out.push_back({i, fit.batch_levels[i], fit.grid->prob(k), fit.residuals[i][k]});
  return out;
}

}  // namespace trends
