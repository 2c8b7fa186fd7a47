#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trends/quantile.hpp"
#include "trends/quantile_data.hpp"
#include "trends/trend_fit.hpp"

namespace trends {

enum class TestMethod { trends, linear_trends, ks, mi };

const char* to_string(TestMethod m) noexcept;

struct TestResult {
  double statistic = 0.0;
  double p_raw = 1.0;
  std::optional<double> p_adjusted;
  TestMethod method = TestMethod::trends;
  std::size_t null_samples = 0;
  std::vector<double> null_statistics;  // in permutation order
  std::vector<std::string> warnings;
};

/// Test statistic of a labelled quantile data set (R^2 of a fit).
using Statistic = std::function<double(const QuantileData&)>;

Statistic trends_statistic(FitOptions options = {});
Statistic linear_trends_statistic(std::vector<double> covariates = {}, FitOptions options = {});

/// a >= b up to rounding; permuted fits equivalent to the observed one may
/// differ from it in the last bits.
bool at_least(double a, double b) noexcept;

struct PermutationOptions {
  int n_perm = 1000;
  std::uint64_t seed = 0;
  /// Enumerate every distinct label assignment instead of sampling; the
  /// p-value is then the exact permutation p-value.
  bool exhaustive = false;
  Execution execution = Execution::serial;
};

/// Label vector of permutation b: a shuffle of `levels` drawn from the
/// stream (seed, b). Every feature sharing a seed sees the same shuffles.
std::vector<int> permuted_levels(std::span<const int> levels, std::uint64_t seed, std::uint64_t b);

/// All distinct rearrangements of the label multiset, in lexicographic order.
std::vector<std::vector<int>> distinct_assignments(std::span<const int> levels,
                                                   std::size_t limit = 1000000);

/// Plain permutation test over batch labels with the add-one p-value.
TestResult permutation_test(const QuantileData& data, const Statistic& statistic,
                            const PermutationOptions& options = {},
                            TestMethod method = TestMethod::trends);

struct SmoothedOptions {
  int min_null = 1000;
  std::uint64_t seed = 0;
  /// Above this many distinct assignments, that many are drawn at random.
  std::size_t max_assignments = 5000;
  /// Used when the smoothed test falls back to the plain one.
  int fallback_perms = 1000;
  QuantileMethod quantile_method = QuantileMethod::type7;
  Execution execution = Execution::serial;
};

/// Permutations excluding the identity and the full reversal, each enriched
/// with bootstrap resamples of every batch; p = 1 - Fhat(observed) under a
/// Gaussian kernel CDF.
TestResult smoothed_permutation_test(std::span<const BatchObservation> batches, const GridPtr& grid,
                                     const Statistic& statistic, const SmoothedOptions& options = {},
                                     TestMethod method = TestMethod::trends);

/// Plug-in bandwidth for kernel distribution function estimation with a
/// Gaussian kernel. Falls back to Silverman's rule when degenerate; never
/// below 1e-6.
double cdf_bandwidth(std::span<const double> sample);
double kernel_cdf(std::span<const double> sample, double bandwidth, double x);
double kernel_survival(std::span<const double> sample, double bandwidth, double x);

/// Column 0 is the observed statistic, columns 1..B the permuted ones.
/// p[b] = #{b' : T[b'] >= T[b]} / (B + 1).
std::vector<double> permutation_pvalues(double observed, std::span<const double> null);

/// Step-down minP adjustment. p_matrix[j] holds the permutation p-values of
/// feature j over a permutation set shared by all features; observed[j] is
/// its raw p. Ties in observed p keep feature order.
std::vector<double> stepdown_minp(const std::vector<std::vector<double>>& p_matrix,
                                  std::span<const double> observed);

struct BaselineOptions {
  int n_perm = 1000;
  std::uint64_t seed = 0;
  int grid_points = 256;  // MI only
  Execution execution = Execution::serial;
};

/// Largest two-sample KS distance between the pooled samples of any two
/// levels; permutations reshuffle level labels over individual samples.
TestResult ks_baseline(std::span<const BatchObservation> batches, const BaselineOptions& options = {});

/// Mutual information between value and level with the level marginal made
/// uniform; Gaussian KDE per level on a shared grid.
TestResult mi_baseline(std::span<const BatchObservation> batches, const BaselineOptions& options = {});

double ks_statistic(std::span<const BatchObservation> batches);
double mi_statistic(std::span<const BatchObservation> batches, int grid_points = 256);

}  // namespace trends
