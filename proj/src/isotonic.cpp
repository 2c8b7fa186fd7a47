#include "trends/isotonic.hpp"

#include <string>

#include "trends/error.hpp"

namespace trends {

void PavaWorkspace::reserve(std::size_t n) { blocks_.reserve(n); }

void pava_inplace(std::span<double> y, std::span<const double> w, Direction direction,
                  PavaWorkspace& ws) {
  const std::size_t n = y.size();
  if (w.size() != n) throw DimensionError("PAVA needs one weight per value");
  auto& blocks = ws.blocks_;
  blocks.clear();
  const bool up = direction == Direction::nondecreasing;
  for (std::size_t i = 0; i < n; ++i) {
    PavaWorkspace::Block cur{w[i] * y[i], w[i], y[i], 1};
    // Violation test is exact: merge while the previous block's mean is
    // strictly on the wrong side of the current one.
    while (!blocks.empty() &&
           (up ? blocks.back().mean > cur.mean : blocks.back().mean < cur.mean)) {
      const auto& prev = blocks.back();
      cur.sum_wy += prev.sum_wy;
      cur.sum_w += prev.sum_w;
      cur.count += prev.count;
      cur.mean = cur.sum_wy / cur.sum_w;
      blocks.pop_back();
    }
    blocks.push_back(cur);
  }
  std::size_t i = 0;
  for (const auto& b : blocks)
    for (std::size_t c = 0; c < b.count; ++c) y[i++] = b.mean;
}

std::vector<double> pava(std::span<const double> values, std::span<const double> weights,
                         Direction direction) {
  if (weights.size() != values.size()) throw DimensionError("PAVA needs one weight per value");
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (!(weights[i] > 0.0))
      throw InvalidWeightError("PAVA weight at index " + std::to_string(i) + " is not positive");
  std::vector<double> out(values.begin(), values.end());
  PavaWorkspace ws;
  ws.reserve(out.size());
  pava_inplace(out, weights, direction, ws);
  return out;
}

std::vector<double> pava(std::span<const double> values, Direction direction) {
  std::vector<double> w(values.size(), 1.0);
  return pava(values, w, direction);
}

std::vector<LevelValue> pool_ties(std::span<const LevelValue> observations, int L) {
  if (L < 1) throw CoverageError("number of levels must be positive");
  std::vector<double> sum_wy(static_cast<std::size_t>(L), 0.0);
  std::vector<double> sum_w(static_cast<std::size_t>(L), 0.0);
  std::vector<int> count(static_cast<std::size_t>(L), 0);
  std::vector<double> first(static_cast<std::size_t>(L), 0.0);
  for (const auto& o : observations) {
    if (o.level < 1 || o.level > L)
      throw CoverageError("level " + std::to_string(o.level) + " outside 1.." + std::to_string(L));
    if (!(o.weight > 0.0)) throw InvalidWeightError("observation weights must be positive");
    const auto l = static_cast<std::size_t>(o.level - 1);
    sum_wy[l] += o.weight * o.value;
    sum_w[l] += o.weight;
    if (count[l]++ == 0) first[l] = o.value;
  }
  std::vector<LevelValue> out;
  out.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto idx = static_cast<std::size_t>(l);
    if (count[idx] == 0) throw CoverageError("level " + std::to_string(l + 1) + " has no observations");
    // A lone observation passes through unchanged; (w*v)/w may round.
    const double value = count[idx] == 1 ? first[idx] : sum_wy[idx] / sum_w[idx];
    out.push_back({l + 1, value, sum_w[idx]});
  }
  return out;
}

}  // namespace trends
