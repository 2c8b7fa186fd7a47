#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trends/quantile.hpp"

namespace trends {

enum class SimModel { S1, S2, S3, R1, R2, R3 };

const char* to_string(SimModel m) noexcept;
SimModel parse_model(const std::string& name);
int model_levels(SimModel m) noexcept;
bool model_trending(SimModel m) noexcept;  // S1, S2, R1, R2

struct SimSpec {
  SimModel model = SimModel::S3;
  int n = 1000;          // samples per batch
  int n_per_level = 1;   // batches per level
  double sigma = 0.1;    // batch-noise scale
  std::uint64_t seed = 0;
};

struct SimDataset {
  std::vector<BatchObservation> batches;  // level-major order
  std::vector<QuantileFunction> truth;    // noise-free Q_l on the grid
};

/// Seed of dataset `index` of a model within a run.
std::uint64_t dataset_seed(std::uint64_t run_seed, SimModel model, std::uint64_t index);

SimDataset generate(const SimSpec& spec, const GridPtr& grid);

/// Noise-free level quantile functions of a model on a grid.
std::vector<QuantileFunction> true_quantiles(SimModel model, const GridPtr& grid);

/// Sum of adjacent L1 Wasserstein distances between the true level
/// distributions of an R-model (location shifts: sum |mu_l - mu_{l-1}|).
double true_delta(SimModel model);

/// Quantile of a negative binomial (failures before the r-th success,
/// success probability p), as the smallest k with CDF(k) >= u.
double nb_quantile(double r, double p, double u);
/// Same for a two-component NB mixture with weight lambda on the second.
double nb_mixture_quantile(double r, double p1, double p2, double lambda, double u);

// Fixtures that follow a trend by construction; each result is checked
// against the trend definition and PreconditionError is thrown otherwise.

/// base + shift_l; shifts must be monotone.
std::vector<QuantileFunction> stochastic_order_fixture(const QuantileFunction& base,
                                                       std::span<const double> shifts);

/// omega_l * first + (1 - omega_l) * last; omega monotone in [0, 1].
std::vector<QuantileFunction> quantile_mixture_fixture(const QuantileFunction& first,
                                                       const QuantileFunction& last,
                                                       std::span<const double> omega);

/// Mixtures of normal components N(mean_k, sd) (means ascending) with
/// per-level proportions (rows of `proportions`, each summing to 1).
/// Rejects migration graphs with a reversed edge or more than one node fed
/// from both sides.
std::vector<QuantileFunction> mixture_migration_fixture(
    const GridPtr& grid, std::span<const double> means, double sd,
    const std::vector<std::vector<double>>& proportions);

/// True if the migration graph of the proportion path is acyclic with at
/// most one doubly-fed node.
bool migration_graph_ok(const std::vector<std::vector<double>>& proportions);

/// sum_l d2(estimated_l, truth_l)^2.
double wasserstein_error(std::span<const QuantileFunction> estimated,
                         std::span<const QuantileFunction> truth);

struct ClassificationMetrics {
  double fpr = 0.0;
  double tpr = 0.0;
  double auroc = 0.5;
};

/// Rejection at p <= alpha. AUROC ranks by ascending p with ties broken by
/// the larger statistic; remaining ties count one half.
ClassificationMetrics classification_metrics(std::span<const double> pvalues,
                                             std::span<const bool> trending,
                                             std::span<const double> statistics, double alpha);

}  // namespace trends
