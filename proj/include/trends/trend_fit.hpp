#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "trends/isotonic.hpp"
#include "trends/quantile.hpp"
#include "trends/quantile_data.hpp"

namespace trends {

enum class Orientation { increasing_above, decreasing_above };

/// Per-quantile monotonicity pattern with a single split. split_index s = 0
/// means p* = 0; otherwise p* = probs[s-1]. Quantile k (0-based) is
/// nondecreasing over levels iff (p_k > p*) matches increasing_above.
struct DirectionConfig {
  std::size_t split_index = 0;
  Orientation orientation = Orientation::increasing_above;

  double split_prob(const QuantileGrid& grid) const {
    return split_index == 0 ? 0.0 : grid.prob(split_index - 1);
  }
  Direction direction(std::size_t k) const {
    const bool above = k >= split_index;
    const bool inc = above == (orientation == Orientation::increasing_above);
    return inc ? Direction::nondecreasing : Direction::nonincreasing;
  }
  std::vector<Direction> directions(std::size_t K) const;

  bool operator==(const DirectionConfig&) const = default;
};

/// The 2P configurations scanned by the trend search, in scan order:
/// p* ascending, increasing_above before decreasing_above.
std::vector<DirectionConfig> enumerate_configs(std::size_t K);

enum class Execution { serial, parallel };

/// exhaustive runs alternating projections for every configuration;
/// bounded skips a configuration whose column-only relaxation already
/// exceeds the best objective found (same minimizer, fewer solves).
enum class SearchMode { exhaustive, bounded };

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  SearchMode search = SearchMode::bounded;
  Execution execution = Execution::serial;
};

struct ProjectionOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  /// Snap the converged iterate to the exact projection by solving the
  /// equality system implied by its tied entries.
  bool polish = true;
  /// Called after every outer iteration with the column-step iterate.
  std::function<void(int, std::span<const double>)> on_iterate;
};

struct ProjectionResult {
  std::vector<double> values;  // L x K, row-major
  int iterations = 0;
  bool polished = false;
};

/// Dykstra alternating projections of x (L x K, rows nondecreasing) onto
/// {rows nondecreasing} intersected with {column k monotone in directions[k]}
/// under the metric sum_k qw_k sum_l w_l (.)^2.
/// Throws PreconditionError for decreasing rows and ConvergenceError at max_iter.
ProjectionResult alternating_projections(std::span<const double> x, std::size_t L,
                                         std::span<const Direction> directions,
                                         std::span<const double> level_weights,
                                         const QuantileGrid& grid,
                                         const ProjectionOptions& options = {});

struct TrendFit {
  GridPtr grid;
  std::vector<QuantileFunction> fitted;   // one per level
  std::optional<DirectionConfig> config;  // empty for the linear variant
  double objective = 0.0;                 // weighted Wasserstein least-squares value
  double r_squared = 1.0;
  double delta_stat = 0.0;
  std::vector<int> batch_levels;
  std::vector<std::vector<double>> residuals;  // per batch, F_i - G_{l_i}
  std::vector<double> config_objectives;  // per scanned configuration; NaN if skipped
  int configs_evaluated = 0;
  int iterations = 0;  // alternating-projection iterations of the chosen fit
  bool exact = true;   // false if the polish step could not certify the fit

  std::size_t levels() const noexcept { return fitted.size(); }
};

TrendFit fit_trends(const QuantileData& data, const FitOptions& options = {});

TrendFit fit_trends(std::span<const BatchObservation> batches, const GridPtr& grid,
                    const FitOptions& options = {},
                    QuantileMethod method = QuantileMethod::type7);

/// Linear variant: each quantile path is projected onto affine functions of
/// `covariates` (t_1 < ... < t_L; empty means 1..L). No direction search.
TrendFit fit_linear_trends(const QuantileData& data, std::span<const double> covariates = {},
                           const FitOptions& options = {});

TrendFit fit_linear_trends(std::span<const BatchObservation> batches,
                           std::span<const double> covariates, const GridPtr& grid,
                           const FitOptions& options = {},
                           QuantileMethod method = QuantileMethod::type7);

/// Weighted Wasserstein least-squares objective of a candidate level
/// sequence (L x K row-major) against the batches in `data`.
double trend_objective(const QuantileData& data, std::span<const double> candidate);

/// Direct check of the trend definition on grid values: every column
/// monotone and at most one direction split, rows nondecreasing.
bool is_trending(std::span<const double> values, std::size_t L, std::size_t K);

}  // namespace trends
