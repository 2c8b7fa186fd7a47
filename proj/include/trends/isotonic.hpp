#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace trends {

enum class Direction { nondecreasing, nonincreasing };

/// Reusable block stack for repeated PAVA calls in hot loops.
class PavaWorkspace {
 public:
  void reserve(std::size_t n);

 private:
  friend void pava_inplace(std::span<double>, std::span<const double>, Direction, PavaWorkspace&);
  struct Block {
    double sum_wy;
    double sum_w;
    double mean;
    std::size_t count;
  };
  std::vector<Block> blocks_;
};

/// Weighted least-squares monotone fit (pool adjacent violators, stack
/// variant). Weights must be positive; throws InvalidWeightError otherwise.
std::vector<double> pava(std::span<const double> values, std::span<const double> weights,
                         Direction direction = Direction::nondecreasing);

/// Unit weights.
std::vector<double> pava(std::span<const double> values,
                         Direction direction = Direction::nondecreasing);

/// Overwrites `values` with the fit. No weight validation; callers own that.
void pava_inplace(std::span<double> values, std::span<const double> weights,
                  Direction direction, PavaWorkspace& ws);

struct LevelValue {
  int level;
  double value;
  double weight;
};

/// Replaces observations sharing a level by their weighted mean carrying the
/// summed weight. Output is ordered by level 1..L. Throws CoverageError when a
/// level has no observation and InvalidWeightError for nonpositive weights.
std::vector<LevelValue> pool_ties(std::span<const LevelValue> observations, int L);

}  // namespace trends
