#include "trends/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "trends/effect_stats.hpp"
#include "trends/quantile_data.hpp"
#include "trends/rng.hpp"

namespace trends::cli {

namespace {

using nlohmann::ordered_json;

constexpr const char* kVersion = "1.0.0";

std::vector<std::string> split_csv(const std::string& line, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw SchemaError("row " + std::to_string(row) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t row, const char* column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError("row " + std::to_string(row) + ", column " + column + ": '" + s + "' is not a finite number");
  return v;
}

int parse_level(const std::string& s, std::size_t row) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < 1)
    throw ParseError("row " + std::to_string(row) + ", column level: '" + s + "' is not a positive integer");
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Feature> ingest(std::istream& in) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw SchemaError("row 1: missing header");
  const auto header = split_csv(line, row);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(trim(header[i]), i);
  auto need = [&](const char* name) {
    auto it = col.find(name);
    if (it == col.end()) throw SchemaError(std::string("row 1: missing column '") + name + "'");
    return it->second;
  };
  const std::size_t c_feat = need("feature_id"), c_batch = need("batch_id"), c_level = need("level"),
                    c_value = need("value");
  const auto opt = [&](const char* name) -> std::optional<std::size_t> {
    auto it = col.find(name);
    return it == col.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  };
  const auto c_weight = opt("weight"), c_cov = opt("covariate");

  struct Building {
    Feature f;
    std::unordered_map<std::string, std::size_t> batch_index;
    std::vector<char> weight_set;
    std::map<int, double> cov;
  };
  std::vector<Building> feats;
  std::unordered_map<std::string, std::size_t> feat_index;

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line, row);
    if (fields.size() != header.size())
      throw SchemaError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                        " fields, found " + std::to_string(fields.size()));
    const std::string fid = trim(fields[c_feat]), bid = trim(fields[c_batch]);
    if (fid.empty()) throw SchemaError("row " + std::to_string(row) + ": empty feature_id");
    if (bid.empty()) throw SchemaError("row " + std::to_string(row) + ": empty batch_id");
    const int level = parse_level(trim(fields[c_level]), row);
    const double value = parse_double(trim(fields[c_value]), row, "value");

    auto [fit, fnew] = feat_index.try_emplace(fid, feats.size());
    if (fnew) {
      feats.emplace_back();
      feats.back().f.id = fid;
    }
    Building& b = feats[fit->second];
    auto [bit, bnew] = b.batch_index.try_emplace(bid, b.f.batches.size());
    if (bnew) {
      BatchObservation obs;
      obs.level = level;
      b.f.batches.push_back(std::move(obs));
      b.f.batch_ids.push_back(bid);
      b.weight_set.push_back(0);
    }
    const std::size_t bi = bit->second;
    BatchObservation& obs = b.f.batches[bi];
    if (obs.level != level)
      throw SchemaError("row " + std::to_string(row) + ": batch '" + bid + "' of feature '" + fid +
                        "' changes level");
    obs.samples.push_back(value);
    if (c_weight) {
      const std::string ws = trim(fields[*c_weight]);
      if (!ws.empty()) {
        const double w = parse_double(ws, row, "weight");
        if (!(w > 0.0)) throw ParseError("row " + std::to_string(row) + ", column weight: weight must be positive");
        if (!b.weight_set[bi]) {
          obs.weight = w;
          b.weight_set[bi] = 1;
        } else if (w != obs.weight) {
          throw SchemaError("row " + std::to_string(row) + ": conflicting weight for batch '" + bid + "'");
        }
      }
    }
    if (c_cov) {
      const std::string cs = trim(fields[*c_cov]);
      if (!cs.empty()) {
        const double t = parse_double(cs, row, "covariate");
        auto [cit, cnew] = b.cov.try_emplace(level, t);
        if (!cnew && cit->second != t)
          throw SchemaError("row " + std::to_string(row) + ": conflicting covariate for level " +
                            std::to_string(level) + " of feature '" + fid + "'");
      }
    }
  }

  std::vector<Feature> out;
  out.reserve(feats.size());
  for (auto& b : feats) {
    int L = 0;
    std::vector<char> seen;
    for (const auto& obs : b.f.batches) {
      L = std::max(L, obs.level);
      if (seen.size() < static_cast<std::size_t>(L)) seen.resize(static_cast<std::size_t>(L), 0);
      seen[static_cast<std::size_t>(obs.level - 1)] = 1;
    }
    for (int l = 1; l <= L; ++l)
      if (!seen[static_cast<std::size_t>(l - 1)])
        throw CoverageError("feature '" + b.f.id + "' has no batch at level " + std::to_string(l));
    if (!b.cov.empty()) {
      if (b.cov.size() != static_cast<std::size_t>(L))
        throw SchemaError("feature '" + b.f.id + "' has covariates for only some levels");
      for (const auto& [l, t] : b.cov) b.f.covariates.push_back(t);
    }
    out.push_back(std::move(b.f));
  }
  return out;
}

std::vector<Feature> ingest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return ingest(in);
}

void dump(std::ostream& out, const std::vector<Feature>& features) {
  bool weights = false, covs = false;
  for (const auto& f : features) {
    covs = covs || !f.covariates.empty();
    for (const auto& b : f.batches) weights = weights || b.weight != 1.0;
  }
  out << "feature_id,batch_id,level,value" << (weights ? ",weight" : "") << (covs ? ",covariate" : "") << '\n';
  for (const auto& f : features)
    for (std::size_t i = 0; i < f.batches.size(); ++i) {
      const auto& b = f.batches[i];
      for (double v : b.samples) {
        out << csv_field(f.id) << ',' << csv_field(f.batch_ids[i]) << ',' << b.level << ',' << format_number(v);
        if (weights) out << ',' << format_number(b.weight);
        if (covs) {
          out << ',';
          if (!f.covariates.empty()) out << format_number(f.covariates[static_cast<std::size_t>(b.level - 1)]);
        }
        out << '\n';
      }
    }
}

void check_config(const AnalysisConfig& cfg) {
  if (cfg.grid_size < 3) throw PreconditionError("--grid-size must be at least 3");
  if (cfg.perms < 0) throw PreconditionError("--perms must be nonnegative");
  if (cfg.min_null < 1) throw PreconditionError("--min-null must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw PreconditionError("--alpha must lie in (0, 1)");
  if (cfg.threads < 1) throw PreconditionError("--threads must be positive");
  if (!(cfg.tol > 0.0)) throw PreconditionError("--tol must be positive");
  if (cfg.max_iter < 1) throw PreconditionError("--max-iter must be positive");
  if (cfg.smoothed && cfg.method != TestMethod::trends && cfg.method != TestMethod::linear_trends)
    throw PreconditionError("--smoothed applies to the trends and linear methods only");
  if (cfg.minp && cfg.smoothed) throw PreconditionError("--adjust minp needs plain permutations, not --smoothed");
  if (cfg.minp && cfg.perms == 0) throw PreconditionError("--adjust minp needs --perms > 0");
  if (!cfg.covariates.empty() && cfg.method != TestMethod::linear_trends)
    throw PreconditionError("--covariates applies to the linear method only");
}

std::size_t AnalysisReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(features.begin(), features.end(), [](const FeatureResult& r) { return !r.error.empty(); }));
}

int default_threads() {
  if (const char* env = std::getenv("TRENDS_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

namespace {

FeatureResult analyze_feature(const Feature& f, const AnalysisConfig& cfg, const GridPtr& grid,
                              std::uint64_t perm_seed) {
  FeatureResult r;
  r.feature = f.id;
  r.batch_ids = f.batch_ids;
  r.N = f.batches.size();
  for (const auto& b : f.batches) {
    r.L = std::max(r.L, b.level);
    r.n_total += b.samples.size();
  }
  FitOptions fo;
  fo.tol = cfg.tol;
  fo.max_iter = cfg.max_iter;
  if (cfg.method == TestMethod::trends || cfg.method == TestMethod::linear_trends) {
    const QuantileData data = make_quantile_data(f.batches, grid, cfg.estimator);
    std::vector<double> cov = cfg.covariates.empty() ? f.covariates : cfg.covariates;
    Statistic stat;
    if (cfg.method == TestMethod::trends) {
      r.fit = fit_trends(data, fo);
      stat = trends_statistic(fo);
    } else {
      r.fit = fit_linear_trends(data, cov, fo);
      stat = linear_trends_statistic(cov, fo);
    }
    r.statistic = r.fit->r_squared;
    if (cfg.perms > 0 || cfg.smoothed) {
      if (cfg.smoothed) {
        SmoothedOptions so;
        so.min_null = cfg.min_null;
        so.seed = perm_seed;
        so.quantile_method = cfg.estimator;
        so.fallback_perms = cfg.perms > 0 ? cfg.perms : 1000;
        r.test = smoothed_permutation_test(f.batches, grid, stat, so, cfg.method);
      } else {
        PermutationOptions po;
        po.n_perm = cfg.perms;
        po.seed = perm_seed;
        r.test = permutation_test(data, stat, po, cfg.method);
      }
    }
  } else {
    BaselineOptions bo;
    bo.n_perm = std::max(cfg.perms, 1);
    bo.seed = perm_seed;
    if (cfg.perms > 0) {
      r.test = cfg.method == TestMethod::ks ? ks_baseline(f.batches, bo) : mi_baseline(f.batches, bo);
      r.statistic = r.test->statistic;
    } else {
      r.statistic = cfg.method == TestMethod::ks ? ks_statistic(f.batches) : mi_statistic(f.batches);
    }
  }
  return r;
}

}  // namespace

AnalysisReport run_analysis(const std::vector<Feature>& features, const AnalysisConfig& cfg) {
  check_config(cfg);
  AnalysisReport rep;
  if (features.empty()) {
    rep.warnings.push_back("input contains no features");
    return rep;
  }
  const GridPtr grid = default_grid(cfg.grid_size);
  const std::uint64_t perm_seed = stream_seed(cfg.seed, {0x636c69ULL});
  rep.features.resize(features.size());
  const auto n = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(dynamic) num_threads(cfg.threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& f = features[static_cast<std::size_t>(i)];
    try {
      rep.features[static_cast<std::size_t>(i)] = analyze_feature(f, cfg, grid, perm_seed);
    } catch (const std::exception& e) {
      FeatureResult fr;
      fr.feature = f.id;
      fr.error = e.what();
      rep.features[static_cast<std::size_t>(i)] = std::move(fr);
    }
  }
  if (cfg.minp) {
    std::vector<std::size_t> ok;
    std::vector<std::vector<double>> pmat;
    std::vector<double> raw;
    for (std::size_t i = 0; i < rep.features.size(); ++i) {
      const auto& fr = rep.features[i];
      if (!fr.error.empty() || !fr.test) continue;
      ok.push_back(i);
      pmat.push_back(permutation_pvalues(fr.test->statistic, fr.test->null_statistics));
      raw.push_back(fr.test->p_raw);
    }
    const auto adj = stepdown_minp(pmat, raw);
    for (std::size_t j = 0; j < ok.size(); ++j) rep.features[ok[j]].test->p_adjusted = adj[j];
  }
  for (const auto& fr : rep.features)
    if (fr.test)
      for (const auto& w : fr.test->warnings) rep.warnings.push_back(fr.feature + ": " + w);
  return rep;
}

namespace {

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::size_t> summary_order(const AnalysisReport& rep) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < rep.features.size(); ++i)
    if (rep.features[i].error.empty()) order.push_back(i);
  auto key = [&](std::size_t i) {
    const auto& f = rep.features[i];
    return f.fit ? f.fit->delta_stat : f.statistic;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  return order;
}

ordered_json json_number(double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); }

}  // namespace

void write_outputs(const AnalysisReport& rep, const AnalysisConfig& cfg, const std::string& dir,
                   const std::string& input_name) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream o(fs::path(dir) / name);
    if (!o) throw Error("cannot write '" + (fs::path(dir) / name).string() + "'");
    return o;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto order = summary_order(rep);
  const char* method = to_string(cfg.method);

  struct SummaryRow {
    const FeatureResult* f;
    double r2, delta, p_raw, p_adj;
    bool significant;
  };
  std::vector<SummaryRow> rows;
  for (std::size_t i : order) {
    const auto& f = rep.features[i];
    SummaryRow s{&f, f.fit ? f.fit->r_squared : nan, f.fit ? f.fit->delta_stat : nan,
                 f.test ? f.test->p_raw : nan, f.test && f.test->p_adjusted ? *f.test->p_adjusted : nan, false};
    const double p = std::isnan(s.p_adj) ? s.p_raw : s.p_adj;
    s.significant = !std::isnan(p) && p <= cfg.alpha;
    rows.push_back(s);
  }

  if (cfg.format == OutputFormat::csv) {
    auto sum = open("summary.csv");
    sum << "feature,method,statistic,r2,delta,p_raw,p_adj,significant,L,N,n_total\n";
    for (const auto& s : rows)
      sum << csv_field(s.f->feature) << ',' << method << ',' << format_number(s.f->statistic) << ','
          << format_number(s.r2) << ',' << format_number(s.delta) << ',' << format_number(s.p_raw) << ','
          << format_number(s.p_adj) << ',' << (s.significant ? 1 : 0) << ',' << s.f->L << ',' << s.f->N << ','
          << s.f->n_total << '\n';
    auto fit = open("fitted.csv");
    fit << "feature,level,p,value\n";
    auto res = open("residuals.csv");
    res << "feature,batch,level,p,residual\n";
    for (const auto& f : rep.features) {
      if (!f.fit) continue;
      const auto& g = *f.fit->grid;
      for (std::size_t l = 0; l < f.fit->fitted.size(); ++l)
        for (std::size_t k = 0; k < g.size(); ++k)
          fit << csv_field(f.feature) << ',' << l + 1 << ',' << format_number(g.prob(k)) << ','
              << format_number(f.fit->fitted[l][k]) << '\n';
      for (const auto& row : residual_table(*f.fit))
        res << csv_field(f.feature) << ',' << csv_field(f.batch_ids[row.batch]) << ',' << row.level << ','
            << format_number(row.prob) << ',' << format_number(row.residual) << '\n';
    }
  } else {
    ordered_json doc;
    doc["summary"] = ordered_json::array();
    for (const auto& s : rows)
      doc["summary"].push_back({{"feature", s.f->feature}, {"method", method},
                                {"statistic", json_number(s.f->statistic)}, {"r2", json_number(s.r2)},
                                {"delta", json_number(s.delta)}, {"p_raw", json_number(s.p_raw)},
                                {"p_adj", json_number(s.p_adj)}, {"significant", s.significant},
                                {"L", s.f->L}, {"N", s.f->N}, {"n_total", s.f->n_total}});
    doc["fitted"] = ordered_json::array();
    doc["residuals"] = ordered_json::array();
    for (const auto& f : rep.features) {
      if (!f.fit) continue;
      ordered_json levels = ordered_json::array();
      for (const auto& q : f.fit->fitted) levels.push_back(std::vector<double>(q.values().begin(), q.values().end()));
      doc["fitted"].push_back({{"feature", f.feature}, {"p", f.fit->grid->probs()}, {"levels", levels}});
      ordered_json batches = ordered_json::array();
      for (std::size_t i = 0; i < f.fit->residuals.size(); ++i)
        batches.push_back({{"batch", f.batch_ids[i]}, {"level", f.fit->batch_levels[i]},
                           {"residual", f.fit->residuals[i]}});
      doc["residuals"].push_back({{"feature", f.feature}, {"batches", batches}});
    }
    open("results.json") << doc.dump(1) << '\n';
  }

  const std::string errors_path = (fs::path(dir) / "errors.csv").string();
  if (rep.failures() > 0) {
    auto err = open("errors.csv");
    err << "feature,error\n";
    for (const auto& f : rep.features)
      if (!f.error.empty()) err << csv_field(f.feature) << ',' << csv_field(f.error) << '\n';
  } else {
    fs::remove(errors_path);
  }

  ordered_json man;
  man["tool"] = "trends";
  man["version"] = kVersion;
  if (cfg.timestamp) man["timestamp"] = utc_timestamp();
  man["input"] = input_name;
  man["config"] = {{"method", method},
                   {"grid_size", cfg.grid_size},
                   {"quantile_estimator", cfg.estimator == QuantileMethod::type7 ? "type7" : "ecdf_inf"},
                   {"perms", cfg.perms},
                   {"smoothed", cfg.smoothed},
                   {"min_null", cfg.min_null},
                   {"adjust", cfg.minp ? "minp" : "none"},
                   {"alpha", cfg.alpha},
                   {"seed", cfg.seed},
                   {"tol", cfg.tol},
                   {"max_iter", cfg.max_iter},
                   {"strict", cfg.strict},
                   {"covariates", cfg.covariates},
                   {"format", cfg.format == OutputFormat::csv ? "csv" : "json"}};
  man["grid"] = {{"kind", "uniform"}, {"size", cfg.grid_size}, {"quantiles", cfg.grid_size - 1}};
  man["features"] = rep.features.size();
  man["failed"] = rep.failures();
  man["warnings"] = rep.warnings;
  open("manifest.json") << man.dump(2) << '\n';
}

}  // namespace trends::cli
