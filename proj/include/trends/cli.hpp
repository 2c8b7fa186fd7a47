#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trends/error.hpp"
#include "trends/inference.hpp"
#include "trends/quantile.hpp"
#include "trends/trend_fit.hpp"

namespace trends::cli {

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// One feature of a long-format input file.
struct Feature {
  std::string id;
  std::vector<std::string> batch_ids;
  std::vector<BatchObservation> batches;
  std::vector<double> covariates;  // per level; empty when the file has none
};

/// Reads `feature_id,batch_id,level,value[,weight][,covariate]` rows (header
/// required, columns located by name). Features and batches keep their
/// first-appearance order; rows of the same batch append samples.
std::vector<Feature> ingest(std::istream& in);
std::vector<Feature> ingest_file(const std::string& path);

/// Writes features back in the input schema; ingest(dump(x)) == x.
void dump(std::ostream& out, const std::vector<Feature>& features);

enum class OutputFormat { csv, json };

struct AnalysisConfig {
  TestMethod method = TestMethod::trends;
  int grid_size = 100;
  QuantileMethod estimator = QuantileMethod::type7;
  int perms = 0;
  bool smoothed = false;
  int min_null = 1000;
  bool minp = false;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = 1e-8;
  int max_iter = 10000;
  bool strict = false;
  std::vector<double> covariates;
  OutputFormat format = OutputFormat::csv;
  bool timestamp = true;
};

/// Throws PreconditionError on inconsistent settings.
void check_config(const AnalysisConfig& cfg);

struct FeatureResult {
  std::string feature;
  std::string error;  // empty on success
  std::optional<TrendFit> fit;
  std::optional<TestResult> test;
  double statistic = 0.0;
  int L = 0;
  std::size_t N = 0;
  std::size_t n_total = 0;
  std::vector<std::string> batch_ids;
};

struct AnalysisReport {
  std::vector<FeatureResult> features;  // input order
  std::vector<std::string> warnings;

  std::size_t failures() const;
  int exit_code() const { return failures() == 0 ? 0 : 1; }
};

AnalysisReport run_analysis(const std::vector<Feature>& features, const AnalysisConfig& cfg);

/// Writes summary.csv, fitted.csv, residuals.csv (or results.json),
/// errors.csv when features failed, and manifest.json into `dir`.
void write_outputs(const AnalysisReport& report, const AnalysisConfig& cfg, const std::string& dir,
                   const std::string& input_name);

/// Number of worker threads: TRENDS_THREADS if set, else 1.
int default_threads();

std::string format_number(double v);

}  // namespace trends::cli
