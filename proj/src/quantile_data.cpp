#include "trends/quantile_data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trends/error.hpp"
#include "trends/isotonic.hpp"

namespace trends {

void validate(const QuantileData& data) {
  if (!data.grid) throw InvalidGridError("quantile data without grid");
  const std::size_t n = data.batches();
  if (n == 0) throw CoverageError("no batches");
  if (data.weights.size() != n) throw DimensionError("one weight per batch required");
  if (data.quantiles.size() != n * data.cols()) throw DimensionError("quantile matrix has wrong size");
  if (data.L < 1) throw CoverageError("number of levels must be positive");
  std::vector<char> seen(static_cast<std::size_t>(data.L), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = data.levels[i];
    if (l < 1 || l > data.L)
      throw CoverageError("batch level " + std::to_string(l) + " outside 1.." + std::to_string(data.L));
    seen[static_cast<std::size_t>(l - 1)] = 1;
    if (!(data.weights[i] > 0.0)) throw InvalidWeightError("batch weights must be positive");
    auto r = data.row(i);
    for (double v : r)
      if (std::isnan(v)) throw PreconditionError("quantile estimates contain NaN");
    if (!validate_qf(r)) throw PreconditionError("batch " + std::to_string(i) + " quantiles decrease");
  }
  for (int l = 0; l < data.L; ++l)
    if (!seen[static_cast<std::size_t>(l)])
      throw CoverageError("level " + std::to_string(l + 1) + " has no batch");
}

QuantileData QuantileData::relabeled(std::span<const int> new_levels) const {
  if (new_levels.size() != batches()) throw DimensionError("relabeling needs one level per batch");
  QuantileData out = *this;
  out.levels.assign(new_levels.begin(), new_levels.end());
  return out;
}

QuantileData make_quantile_data(std::span<const BatchObservation> batches, const GridPtr& grid,
                                QuantileMethod method) {
  QuantileData d;
  d.grid = grid;
  const std::size_t K = grid->size();
  d.quantiles.resize(batches.size() * K);
  int L = 0;
  std::vector<double> sorted;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto& b = batches[i];
    if (b.samples.empty()) throw EstimationError("batch " + std::to_string(i) + " has no samples");
    sorted.assign(b.samples.begin(), b.samples.end());
    for (double v : sorted)
      if (!std::isfinite(v)) throw EstimationError("non-finite sample in batch " + std::to_string(i));
    std::sort(sorted.begin(), sorted.end());
    estimate_sorted_quantiles(sorted, *grid, method, d.row(i));
    d.levels.push_back(b.level);
    d.weights.push_back(b.weight);
    L = std::max(L, b.level);
  }
  d.L = L;
  validate(d);
  return d;
}

QuantileData make_quantile_data(const GridPtr& grid, std::vector<int> levels,
                                std::vector<double> weights,
                                const std::vector<std::vector<double>>& rows) {
  QuantileData d;
  d.grid = grid;
  d.levels = std::move(levels);
  d.weights = std::move(weights);
  for (const auto& r : rows) {
    if (r.size() != grid->size()) throw DimensionError("quantile row does not match grid");
    d.quantiles.insert(d.quantiles.end(), r.begin(), r.end());
  }
  d.L = d.levels.empty() ? 0 : *std::max_element(d.levels.begin(), d.levels.end());
  validate(d);
  return d;
}

PooledLevels pool_levels(const QuantileData& data) {
  PooledLevels p;
  p.L = static_cast<std::size_t>(data.L);
  p.K = data.cols();
  p.x.assign(p.L * p.K, 0.0);
  p.weight.assign(p.L, 0.0);
  std::vector<LevelValue> column(data.batches());
  for (std::size_t k = 0; k < p.K; ++k) {
    for (std::size_t i = 0; i < data.batches(); ++i)
      column[i] = {data.levels[i], data.row(i)[k], data.weights[i]};
    const auto pooled = pool_ties(column, data.L);
    for (std::size_t l = 0; l < p.L; ++l) {
      p.x[l * p.K + k] = pooled[l].value;
      p.weight[l] = pooled[l].weight;
    }
  }
  const auto& grid = *data.grid;
  double within = 0.0;
  for (std::size_t i = 0; i < data.batches(); ++i) {
    const auto l = static_cast<std::size_t>(data.levels[i] - 1);
    auto r = data.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < p.K; ++k) {
      const double d = r[k] - p.x[l * p.K + k];
      s += grid.weight(k) * d * d;
    }
    within += data.weights[i] * s;
  }
  p.within = within;
  return p;
}

}  // namespace trends
