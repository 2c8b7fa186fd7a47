#pragma once

#include <cstdint>
#include <vector>

#include "trends/inference.hpp"
#include "trends/simgen.hpp"

namespace trends {

struct Table1Config {
  int s1 = 50, s2 = 50, s3 = 100;
  int n = 1000;
  double sigma = 0.1;
  int n_perm = 200;
  bool minp = true;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::vector<TestMethod> methods{TestMethod::trends, TestMethod::ks, TestMethod::mi};
  Execution execution = Execution::serial;
};

struct MethodMetrics {
  TestMethod method;
  ClassificationMetrics raw;
  ClassificationMetrics adjusted;  // equals raw when minp is off
};

std::vector<MethodMetrics> run_table1(const Table1Config& cfg);

struct ConvergenceConfig {
  SimModel model = SimModel::S1;
  double sigma = 0.1;
  std::vector<int> ns{100, 1000};
  std::vector<int> per_level{1};
  int reps = 20;
  std::uint64_t seed = 2;
};

struct ConvergenceRow {
  int n;
  int n_per_level;
  double err_trends;     // mean over repetitions
  double err_empirical;  // per-level Wasserstein means of the batches
};

std::vector<ConvergenceRow> run_convergence(const ConvergenceConfig& cfg);

struct PvalueStudyConfig {
  std::vector<SimModel> models{SimModel::S2, SimModel::S3};
  int datasets = 30;
  int n = 100;
  double sigma = 0.1;
  int min_null = 1000;
  long oracle_min = 10000;
  long oracle_max = 1000000;
  int oracle_exceed = 5;
  std::uint64_t seed = 3;
  Execution execution = Execution::serial;
};

struct PvalueRow {
  SimModel model;
  double mean_oracle;
  double mse_smoothed;
  double mse_perm;
  long oracle_draws;
};

std::vector<PvalueRow> run_pvalue_study(const PvalueStudyConfig& cfg);

struct MisspecConfig {
  int datasets = 50;
  int n = 100;
  double sigma = 0.3;
  std::uint64_t seed = 4;
};

struct MisspecRow {
  double sigma;
  double mse_trends;
  double mse_emp;
};

MisspecRow run_misspec(const MisspecConfig& cfg);

}  // namespace trends
