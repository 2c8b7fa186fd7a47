#include "trends/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "trends/error.hpp"

namespace trends {

QuantileGrid::QuantileGrid(std::vector<double> probs) : probs_(std::move(probs)) {
  const std::size_t m = probs_.size();
  if (m < 2) throw InvalidGridError("quantile grid needs at least two probabilities");
  for (std::size_t k = 0; k < m; ++k) {
    const double p = probs_[k];
    if (!(p > 0.0 && p < 1.0))
      throw InvalidGridError("grid probability outside (0,1) at index " + std::to_string(k));
    if (k > 0 && !(probs_[k - 1] < p))
      throw InvalidGridError("grid probabilities must be strictly increasing");
  }
  weights_.resize(m);
  const double p0 = 2.0 * probs_[0] - probs_[1];
  const double pP = 2.0 * probs_[m - 1] - probs_[m - 2];
  for (std::size_t k = 0; k < m; ++k) {
    const double lo = k == 0 ? p0 : probs_[k - 1];
    const double hi = k + 1 == m ? pP : probs_[k + 1];
    weights_[k] = (hi - lo) / 2.0;
  }
}

QuantileGrid QuantileGrid::uniform(int P) {
  if (P < 3) throw InvalidGridError("grid size P must be at least 3, got " + std::to_string(P));
  std::vector<double> probs(static_cast<std::size_t>(P - 1));
  for (int k = 1; k < P; ++k) probs[static_cast<std::size_t>(k - 1)] = static_cast<double>(k) / P;
  // The extrapolated differences are not exact in floating point; the
  // uniform grid weights are 1/P by construction.
  std::vector<double> weights(probs.size(), 1.0 / P);
  return QuantileGrid(std::move(probs), std::move(weights));
}

double QuantileGrid::total_weight() const noexcept {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

GridPtr default_grid(int P) { return std::make_shared<const QuantileGrid>(QuantileGrid::uniform(P)); }

bool same_grid(const QuantileGrid& a, const QuantileGrid& b) noexcept {
  return &a == &b || a == b;
}

bool validate_qf(std::span<const double> values) {
  if (values.empty()) throw InvalidQuantileFunctionError("empty quantile vector");
  for (std::size_t k = 1; k < values.size(); ++k)
    if (!(values[k - 1] <= values[k])) return false;
  return true;
}

QuantileFunction::QuantileFunction(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw InvalidGridError("quantile function without grid");
  if (values_.size() != grid_->size())
    throw DimensionError("quantile vector has " + std::to_string(values_.size()) +
                         " entries, grid has " + std::to_string(grid_->size()));
  if (!validate_qf(values_)) throw InvalidQuantileFunctionError("quantile values decrease");
}

namespace {

double type7(std::span<const double> x, double p) {
  const std::size_t n = x.size();
  if (n == 1) return x[0];
  const double h = static_cast<double>(n - 1) * p;
  const double lo_f = std::floor(h);
  std::size_t lo = static_cast<std::size_t>(lo_f);
  if (lo >= n - 1) return x[n - 1];
  const double frac = h - lo_f;
  const double v = x[lo] + frac * (x[lo + 1] - x[lo]);
  return std::min(v, x[lo + 1]);
}

double ecdf_inf(std::span<const double> x, double p) {
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  // Smallest k with k/n >= p, compared in the same arithmetic as the definition.
  auto k = static_cast<std::size_t>(std::ceil(nd * p));
  k = std::clamp<std::size_t>(k, 1, n);
  while (k > 1 && static_cast<double>(k - 1) / nd >= p) --k;
  while (k < n && static_cast<double>(k) / nd < p) ++k;
  return x[k - 1];
}

}  // namespace

void estimate_sorted_quantiles(std::span<const double> sorted, const QuantileGrid& grid,
                               QuantileMethod method, std::span<double> out) {
  if (sorted.empty()) throw EstimationError("cannot estimate quantiles from an empty sample");
  if (out.size() != grid.size()) throw DimensionError("quantile output size mismatch");
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double p = grid.prob(k);
    double v = method == QuantileMethod::type7 ? type7(sorted, p) : ecdf_inf(sorted, p);
    v = std::max(v, prev);
    out[k] = v;
    prev = v;
  }
}

QuantileFunction estimate_quantiles(std::span<const double> samples, const GridPtr& grid,
                                    QuantileMethod method) {
  if (samples.empty()) throw EstimationError("cannot estimate quantiles from an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  for (double v : sorted)
    if (!std::isfinite(v)) throw EstimationError("non-finite sample value");
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> values(grid->size());
  estimate_sorted_quantiles(sorted, *grid, method, values);
  return QuantileFunction(grid, std::move(values));
}

}  // namespace trends
