#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trends/quantile.hpp"

namespace trends {

/// Estimated quantiles of N batches (row-major N x K) with their levels and
/// weights. Every level in 1..L carries at least one batch.
struct QuantileData {
  GridPtr grid;
  int L = 0;
  std::vector<int> levels;
  std::vector<double> weights;
  std::vector<double> quantiles;

  std::size_t batches() const noexcept { return levels.size(); }
  std::size_t cols() const noexcept { return grid ? grid->size() : 0; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(quantiles).subspan(i * cols(), cols());
  }
  std::span<double> row(std::size_t i) {
    return std::span<double>(quantiles).subspan(i * cols(), cols());
  }

  /// Copy with batch i relabeled to new_levels[i].
  QuantileData relabeled(std::span<const int> new_levels) const;
};

/// Validates levels, weights and quantile rows. Throws CoverageError,
/// InvalidWeightError, DimensionError or PreconditionError (NaN or
/// decreasing rows).
void validate(const QuantileData& data);

QuantileData make_quantile_data(std::span<const BatchObservation> batches, const GridPtr& grid,
                                QuantileMethod method = QuantileMethod::type7);

/// Builds QuantileData from already-estimated quantile rows.
QuantileData make_quantile_data(const GridPtr& grid, std::vector<int> levels,
                                std::vector<double> weights,
                                const std::vector<std::vector<double>>& rows);

/// Per-level pooled quantiles (tertiary tie handling applied per quantile
/// index) and summed level weights.
struct PooledLevels {
  std::size_t L = 0;
  std::size_t K = 0;
  std::vector<double> x;       // L x K
  std::vector<double> weight;  // w*_l
  double within = 0.0;         // sum_i w_i d_W(F_i, xbar_{l_i})^2
};

PooledLevels pool_levels(const QuantileData& data);

}  // namespace trends
