#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace trends {

/// Quadrature grid of probabilities 0 < p_1 < ... < p_{P-1} < 1 with midpoint
/// weights (p_{k+1} - p_{k-1}) / 2, where the outer points are extrapolated as
/// p_0 = 2 p_1 - p_2 and p_P = 2 p_{P-1} - p_{P-2}.
class QuantileGrid {
 public:
  /// Throws InvalidGridError unless probs has at least two strictly
  /// increasing entries inside (0, 1).
  explicit QuantileGrid(std::vector<double> probs);

  /// Uniform grid {1/P, ..., (P-1)/P}; every weight is exactly 1/P.
  static QuantileGrid uniform(int P);

  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double prob(std::size_t k) const { return probs_[k]; }
  double weight(std::size_t k) const { return weights_[k]; }
  double total_weight() const noexcept;

  bool operator==(const QuantileGrid& other) const noexcept {
    return probs_ == other.probs_;
  }

 private:
  QuantileGrid(std::vector<double> probs, std::vector<double> weights)
      : probs_(std::move(probs)), weights_(std::move(weights)) {}

  std::vector<double> probs_;
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const QuantileGrid>;

/// Shared uniform grid with P - 1 probabilities. Throws InvalidGridError for P < 3.
GridPtr default_grid(int P);

bool same_grid(const QuantileGrid& a, const QuantileGrid& b) noexcept;

/// Nondecreasing quantile values on a grid. Construction rejects any decrease.
class QuantileFunction {
 public:
  QuantileFunction(GridPtr grid, std::vector<double> values);

  const QuantileGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

enum class QuantileMethod {
  type7,     // linear interpolation at h = (n-1)p + 1 of the order statistics
  ecdf_inf,  // inf{x : F_n(x) >= p}
};

/// Exact nondecreasing check. Throws InvalidQuantileFunctionError on empty input.
bool validate_qf(std::span<const double> values);

/// Empirical quantiles of `samples` at every grid probability.
/// Throws EstimationError if samples is empty or holds a non-finite value.
QuantileFunction estimate_quantiles(std::span<const double> samples, const GridPtr& grid,
                                    QuantileMethod method = QuantileMethod::type7);

/// Same estimator on an already sorted sample; writes grid.size() values.
void estimate_sorted_quantiles(std::span<const double> sorted, const QuantileGrid& grid,
                               QuantileMethod method, std::span<double> out);

/// One batch of samples observed at an ordinal level.
struct BatchObservation {
  int level = 1;        // 1..L
  double weight = 1.0;  // > 0
  std::vector<double> samples;

  QuantileFunction empirical_qf(const GridPtr& grid,
                                QuantileMethod method = QuantileMethod::type7) const {
    return estimate_quantiles(samples, grid, method);
  }
};

}  // namespace trends
