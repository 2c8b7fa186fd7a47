#include "trends/wasserstein.hpp"

#include <cmath>
#include <stdexcept>

#include "trends/error.hpp"

namespace trends {

double wasserstein_sq(std::span<const double> f, std::span<const double> g,
                      const QuantileGrid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw DimensionError("quantile vectors do not match the grid");
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double d = f[k] - g[k];
    s += grid.weight(k) * d * d;
  }
  return s;
}

double wasserstein_dist(std::span<const double> f, std::span<const double> g,
                        const QuantileGrid& grid, int q) {
  if (q == 2) return std::sqrt(wasserstein_sq(f, g, grid));
  if (q != 1) throw std::invalid_argument("Wasserstein order must be 1 or 2");
  if (f.size() != grid.size() || g.size() != grid.size())
    throw DimensionError("quantile vectors do not match the grid");
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += grid.weight(k) * std::fabs(f[k] - g[k]);
  return s;
}

double wasserstein_dist(const QuantileFunction& f, const QuantileFunction& g, int q) {
  if (!same_grid(f.grid(), g.grid())) throw DimensionError("quantile functions use different grids");
  return wasserstein_dist(f.values(), g.values(), f.grid(), q);
}

QuantileFunction wasserstein_mean(std::span<const QuantileFunction> fs,
                                  std::span<const double> weights) {
  if (fs.empty()) throw std::invalid_argument("Wasserstein mean of an empty list");
  if (weights.size() != fs.size()) throw DimensionError("one weight per quantile function required");
  const QuantileGrid& grid = fs.front().grid();
  double total = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (!same_grid(fs[i].grid(), grid)) throw DimensionError("quantile functions use different grids");
    if (!(weights[i] > 0.0)) throw InvalidWeightError("Wasserstein mean weights must be positive");
    total += weights[i];
  }
  // Accumulating in a fixed order keeps the output exactly nondecreasing:
  // every partial sum is a monotone function of monotone inputs.
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < fs.size(); ++i)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += weights[i] * fs[i][k];
  for (double& v : out) v /= total;
  return QuantileFunction(fs.front().grid_ptr(), std::move(out));
}

QuantileFunction wasserstein_mean(std::span<const QuantileFunction> fs) {
  std::vector<double> w(fs.size(), 1.0);
  return wasserstein_mean(fs, w);
}

}  // namespace trends
