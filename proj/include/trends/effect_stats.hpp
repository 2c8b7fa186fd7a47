#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trends/quantile.hpp"
#include "trends/quantile_data.hpp"

namespace trends {

struct TrendFit;

/// Wasserstein R^2 of a fit against the data it was fitted to. Batch weights
/// enter both sums and the pooled mean; with unit weights this is the plain
/// ratio. Returns 1 when the data have zero spread.
double r_squared(const TrendFit& fit, const QuantileData& data);

/// (1/L) d1(G_1, G_L).
double delta_stat(const TrendFit& fit);

/// d1(G_1, G_L): the path length of a trending fit.
double path_length(const TrendFit& fit);

/// Sum of adjacent-level d1 distances between empirical quantile functions.
/// Requires exactly one batch per level (UnsupportedError otherwise).
double delta_emp(const QuantileData& data);

struct ResidualRow {
  std::size_t batch;
  int level;
  double prob;
  double residual;
};

std::vector<ResidualRow> residual_table(const TrendFit& fit);

}  // namespace trends
