#pragma once

#include <span>
#include <vector>

#include "trends/quantile.hpp"

namespace trends {

/// Midpoint-quadrature L_q Wasserstein distance, q in {1, 2}:
/// (sum_k w_k |f_k - g_k|^q)^(1/q) with the grid's unnormalized weights.
/// Throws DimensionError when the grids differ and std::invalid_argument for other q.
double wasserstein_dist(const QuantileFunction& f, const QuantileFunction& g, int q);

/// Same quadrature on raw vectors sharing `grid`.
double wasserstein_dist(std::span<const double> f, std::span<const double> g,
                        const QuantileGrid& grid, int q);

/// Squared L_2 distance without the square root (the quantity every
/// least-squares objective sums).
double wasserstein_sq(std::span<const double> f, std::span<const double> g,
                      const QuantileGrid& grid);

/// Weighted pointwise average of quantile functions, the Frechet mean under
/// the L_2 Wasserstein metric.
QuantileFunction wasserstein_mean(std::span<const QuantileFunction> fs,
                                  std::span<const double> weights);

/// Unit-weight overload.
QuantileFunction wasserstein_mean(std::span<const QuantileFunction> fs);

}  // namespace trends
