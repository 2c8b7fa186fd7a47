#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trends/cli.hpp"
#include "trends/experiments.hpp"
#include "trends/simgen.hpp"

namespace {

using namespace trends;

struct SimArgs {
  std::string mode;
  std::string out;
  std::uint64_t seed = 1;
  double sigma = 0.1;
  int n = 1000;
  int datasets = 10;
  int perms = 200;
  std::string adjust = "minp";
  std::vector<std::string> methods{"trends", "ks"};
  std::vector<int> ns{30, 100, 300};
  std::vector<int> per_level{1};
  int reps = 20;
  int min_null = 1000;
  long oracle_min = 10000;
  long oracle_max = 1000000;
  std::vector<std::string> models{"S1", "S2", "S3"};
  int n_per_level = 1;
};

TestMethod parse_method(const std::string& s) {
  static const std::map<std::string, TestMethod> m{{"trends", TestMethod::trends},
                                                   {"linear", TestMethod::linear_trends},
                                                   {"ks", TestMethod::ks},
                                                   {"mi", TestMethod::mi}};
  auto it = m.find(s);
  if (it == m.end()) throw PreconditionError("unknown method '" + s + "'");
  return it->second;
}

std::ostream& open_table(const SimArgs& a, const std::string& name, std::ofstream& file) {
  if (a.out.empty()) return std::cout;
  std::filesystem::create_directories(a.out);
  file.open(std::filesystem::path(a.out) / name);
  if (!file) throw Error("cannot write into '" + a.out + "'");
  return file;
}

void run_sim(const SimArgs& a) {
  std::ofstream file;
  if (a.mode == "table1") {
    Table1Config cfg;
    cfg.s1 = a.datasets;
    cfg.s2 = a.datasets;
    cfg.s3 = 2 * a.datasets;
    cfg.n = a.n;
    cfg.sigma = a.sigma;
    cfg.n_perm = a.perms;
    cfg.minp = a.adjust == "minp";
    cfg.seed = a.seed;
    cfg.methods.clear();
    for (const auto& m : a.methods) cfg.methods.push_back(parse_method(m));
    auto& o = open_table(a, "table1.csv", file);
    o << "method,fpr,tpr,auroc\n";
    for (const auto& r : run_table1(cfg))
      o << to_string(r.method) << ',' << cli::format_number(r.adjusted.fpr) << ','
        << cli::format_number(r.adjusted.tpr) << ',' << cli::format_number(r.adjusted.auroc) << '\n';
  } else if (a.mode == "convergence") {
    ConvergenceConfig cfg;
    cfg.sigma = a.sigma;
    cfg.ns = a.ns;
    cfg.per_level = a.per_level;
    cfg.reps = a.reps;
    cfg.seed = a.seed;
    auto& o = open_table(a, "convergence.csv", file);
    o << "n,n_per_level,error_trends,error_empirical\n";
    for (const auto& r : run_convergence(cfg))
      o << r.n << ',' << r.n_per_level << ',' << cli::format_number(r.err_trends) << ','
        << cli::format_number(r.err_empirical) << '\n';
  } else if (a.mode == "pvalues") {
    PvalueStudyConfig cfg;
    cfg.models.clear();
    for (const auto& m : a.models) cfg.models.push_back(parse_model(m));
    cfg.datasets = a.datasets;
    cfg.n = a.n;
    cfg.sigma = a.sigma;
    cfg.min_null = a.min_null;
    cfg.oracle_min = a.oracle_min;
    cfg.oracle_max = a.oracle_max;
    cfg.seed = a.seed;
    auto& o = open_table(a, "pvalues.csv", file);
    o << "model,mean_oracle_p,mse_smoothed,mse_perm,oracle_draws\n";
    for (const auto& r : run_pvalue_study(cfg))
      o << to_string(r.model) << ',' << cli::format_number(r.mean_oracle) << ','
        << cli::format_number(r.mse_smoothed) << ',' << cli::format_number(r.mse_perm) << ',' << r.oracle_draws
        << '\n';
  } else if (a.mode == "misspec") {
    MisspecConfig cfg;
    cfg.datasets = a.datasets;
    cfg.n = a.n;
    cfg.sigma = a.sigma;
    cfg.seed = a.seed;
    const auto r = run_misspec(cfg);
    auto& o = open_table(a, "misspec.csv", file);
    o << "sigma,mse_delta_trends,mse_delta_emp\n"
      << cli::format_number(r.sigma) << ',' << cli::format_number(r.mse_trends) << ','
      << cli::format_number(r.mse_emp) << '\n';
  } else if (a.mode == "dump") {
    const GridPtr grid = default_grid(100);
    std::vector<cli::Feature> feats;
    for (const auto& name : a.models) {
      const SimModel m = parse_model(name);
      for (int d = 0; d < a.datasets; ++d) {
        SimSpec spec;
        spec.model = m;
        spec.n = a.n;
        spec.n_per_level = a.n_per_level;
        spec.sigma = a.sigma;
        spec.seed = dataset_seed(a.seed, m, static_cast<std::uint64_t>(d));
        auto ds = generate(spec, grid);
        cli::Feature f;
        f.id = name + "_" + std::to_string(d);
        for (std::size_t i = 0; i < ds.batches.size(); ++i) f.batch_ids.push_back("b" + std::to_string(i + 1));
        f.batches = std::move(ds.batches);
        feats.push_back(std::move(f));
      }
    }
    cli::dump(open_table(a, "simulated.csv", file), feats);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trend-constrained Wasserstein regression on ordered sequences of distributions"};
  app.require_subcommand(1);

  cli::AnalysisConfig cfg;
  cfg.threads = cli::default_threads();
  std::string input, out_dir = "trends_out", method = "trends", estimator = "type7", adjust = "none",
              format = "csv";
  bool no_timestamp = false;
  auto* an = app.add_subcommand("analyze", "Fit every feature of a long-format CSV file");
  an->add_option("input", input, "CSV with feature_id,batch_id,level,value[,weight][,covariate]")->required();
  an->add_option("-o,--out", out_dir, "Output directory");
  an->add_option("--method", method, "trends|linear|ks|mi")
      ->check(CLI::IsMember({"trends", "linear", "ks", "mi"}));
  an->add_option("--grid-size", cfg.grid_size, "P; quantiles at k/P for k = 1..P-1");
  an->add_option("--quantile-estimator", estimator, "type7|ecdf_inf")->check(CLI::IsMember({"type7", "ecdf_inf"}));
  an->add_option("--perms", cfg.perms, "Number of label permutations (0: no p-values)");
  an->add_flag("--smoothed", cfg.smoothed, "Bootstrap-smoothed permutation p-values");
  an->add_option("--min-null", cfg.min_null, "Minimum null sample size for --smoothed");
  an->add_option("--adjust", adjust, "none|minp")->check(CLI::IsMember({"none", "minp"}));
  an->add_option("--alpha", cfg.alpha, "Significance level");
  an->add_option("--seed", cfg.seed, "Random seed");
  an->add_option("--threads", cfg.threads, "Worker threads (default: TRENDS_THREADS or 1)");
  an->add_option("--tol", cfg.tol, "Convergence tolerance of alternating projections");
  an->add_option("--max-iter", cfg.max_iter, "Iteration cap of alternating projections");
  an->add_flag("--strict", cfg.strict, "Fail the run on the first feature error");
  an->add_option("--covariates", cfg.covariates, "Per-level covariates t_1 < ... < t_L (linear method)")
      ->delimiter(',');
  an->add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  an->add_flag("--no-timestamp", no_timestamp, "Omit the timestamp from manifest.json");

  SimArgs sim;
  auto* sm = app.add_subcommand("simulate", "Run a simulation study and print its metrics table");
  sm->add_option("mode", sim.mode, "table1|convergence|pvalues|misspec|dump")
      ->required()
      ->check(CLI::IsMember({"table1", "convergence", "pvalues", "misspec", "dump"}));
  sm->add_option("-o,--out", sim.out, "Output directory (default: stdout)");
  sm->add_option("--seed", sim.seed, "Random seed");
  sm->add_option("--sigma", sim.sigma, "Batch-noise scale");
  sm->add_option("--n", sim.n, "Samples per batch");
  sm->add_option("--datasets", sim.datasets, "Data sets per model (table1 doubles S3)");
  sm->add_option("--perms", sim.perms, "Permutations per test");
  sm->add_option("--adjust", sim.adjust, "none|minp")->check(CLI::IsMember({"none", "minp"}));
  sm->add_option("--methods", sim.methods, "Methods for table1")->delimiter(',');
  sm->add_option("--ns", sim.ns, "Sample sizes for convergence")->delimiter(',');
  sm->add_option("--per-level", sim.per_level, "Batches per level for convergence")->delimiter(',');
  sm->add_option("--reps", sim.reps, "Repetitions for convergence");
  sm->add_option("--min-null", sim.min_null, "Smoothed null size for pvalues");
  sm->add_option("--oracle-min", sim.oracle_min, "Initial oracle draws for pvalues");
  sm->add_option("--oracle-max", sim.oracle_max, "Oracle draw cap for pvalues");
  sm->add_option("--models", sim.models, "Models for pvalues and dump")->delimiter(',');
  sm->add_option("--n-per-level", sim.n_per_level, "Batches per level for dump");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*sm) {
    try {
      run_sim(sim);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }

  std::vector<cli::Feature> features;
  try {
    cfg.method = parse_method(method);
    cfg.estimator = estimator == "type7" ? QuantileMethod::type7 : QuantileMethod::ecdf_inf;
    cfg.minp = adjust == "minp";
    cfg.format = format == "json" ? cli::OutputFormat::json : cli::OutputFormat::csv;
    cfg.timestamp = !no_timestamp;
    cli::check_config(cfg);
    features = cli::ingest_file(input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  cli::AnalysisReport report;
  try {
    report = cli::run_analysis(features, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& f : report.features)
    if (!f.error.empty()) std::cerr << "feature " << f.feature << ": " << f.error << '\n';
  if (cfg.strict && report.failures() > 0) {
    std::cerr << "error: " << report.failures() << " feature(s) failed; no output written (--strict)\n";
    return 1;
  }
  try {
    cli::write_outputs(report, cfg, out_dir, input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cerr << report.features.size() - report.failures() << " of " << report.features.size()
            << " features analysed; results in " << out_dir << '\n';
  return report.exit_code();
}
