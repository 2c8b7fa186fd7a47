#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "trends/cli.hpp"

using namespace trends;
using namespace trends::cli;
namespace fs = std::filesystem;

namespace {

std::string sample_csv(int features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::ostringstream s;
  s << "feature_id,batch_id,level,value\n";
  for (int f = 0; f < features; ++f)
    for (int l = 1; l <= 4; ++l)
      for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 15; ++i)
          s << "g" << f << ",b" << l << b << ',' << l << ',' << z(rng) + 0.4 * f * l << '\n';
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("ingest keeps order and groups samples") {
  std::istringstream in("value,level,batch_id,feature_id,weight\n1,1,a,f,2\n2,1,a,f,2\n3,2,b,f,1\n5,1,c,g,1\n6,2,d,g,1\n");
  auto fs = ingest(in);
  REQUIRE(fs.size() == 2);
  CHECK(fs[0].id == "f");
  CHECK(fs[0].batch_ids == std::vector<std::string>{"a", "b"});
  CHECK(fs[0].batches[0].samples == std::vector<double>{1, 2});
  CHECK(fs[0].batches[0].weight == 2.0);
  CHECK(fs[1].batches[1].level == 2);
}

TEST_CASE("ingest errors name the row or feature") {
  auto err = [](const std::string& text) {
    std::istringstream in(text);
    try {
      ingest(in);
    } catch (const std::exception& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  std::istringstream missing("feature_id,batch_id,value\nf,a,1\n");
  CHECK_THROWS_AS(ingest(missing), SchemaError);
  std::istringstream nan("feature_id,batch_id,level,value\nf,a,1,1\nf,a,1,x\n");
  CHECK_THROWS_AS(ingest(nan), ParseError);
  CHECK(err("feature_id,batch_id,level,value\nf,a,1,1\nf,a,1,x\n").find("row 3") != std::string::npos);
  std::istringstream gap("feature_id,batch_id,level,value\nf,a,1,1\nf,b,3,1\n");
  CHECK_THROWS_AS(ingest(gap), CoverageError);
  CHECK(err("feature_id,batch_id,level,value\nf,a,1,1\nf,b,3,1\n").find("'f'") != std::string::npos);
  CHECK(err("feature_id,batch_id,level,value\nf,a,1,1\nf,a,2,1\n").find("row 3") != std::string::npos);
}

TEST_CASE("dump round-trips") {
  std::istringstream in(sample_csv(2, 1));
  auto a = ingest(in);
  std::ostringstream out;
  dump(out, a);
  std::istringstream back(out.str());
  auto b = ingest(back);
  REQUIRE(a.size() == b.size());
  for (std::size_t f = 0; f < a.size(); ++f)
    for (std::size_t i = 0; i < a[f].batches.size(); ++i) CHECK(a[f].batches[i].samples == b[f].batches[i].samples);
}

TEST_CASE("config checks") {
  AnalysisConfig c;
  CHECK_NOTHROW(check_config(c));
  c.minp = true;
  CHECK_THROWS_AS(check_config(c), PreconditionError);
  c.perms = 10;
  CHECK_NOTHROW(check_config(c));
  c.method = TestMethod::ks;
  c.minp = false;
  c.smoothed = true;
  CHECK_THROWS_AS(check_config(c), PreconditionError);
}

TEST_CASE("analysis is deterministic across thread counts and writes outputs") {
  std::istringstream in(sample_csv(3, 2));
  auto features = ingest(in);
  AnalysisConfig c;
  c.perms = 49;
  c.minp = true;
  c.seed = 4;
  c.grid_size = 20;
  c.timestamp = false;
  auto r1 = run_analysis(features, c);
  c.threads = 3;
  auto r3 = run_analysis(features, c);
  REQUIRE(r1.features.size() == 3);
  CHECK(r1.exit_code() == 0);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(r1.features[f].test->p_raw == r3.features[f].test->p_raw);
    CHECK(r1.features[f].test->p_adjusted == r3.features[f].test->p_adjusted);
    CHECK(*r1.features[f].test->p_adjusted >= r1.features[f].test->p_raw);
  }

  const fs::path d1 = fs::temp_directory_path() / "trends_cli_test_1";
  const fs::path d3 = fs::temp_directory_path() / "trends_cli_test_3";
  fs::remove_all(d1);
  fs::remove_all(d3);
  c.threads = 1;
  write_outputs(r1, c, d1.string(), "input.csv");
  c.threads = 3;
  write_outputs(r3, c, d3.string(), "input.csv");
  for (const char* name : {"summary.csv", "fitted.csv", "residuals.csv"}) {
    CHECK(fs::exists(d1 / name));
    CHECK(slurp(d1 / name) == slurp(d3 / name));
  }
  CHECK(fs::exists(d1 / "manifest.json"));
  CHECK_FALSE(fs::exists(d1 / "errors.csv"));
  auto summary = slurp(d1 / "summary.csv");
  CHECK(summary.rfind("feature,method,statistic,r2,delta,p_raw,p_adj,significant,L,N,n_total", 0) == 0);
  fs::remove_all(d1);
  fs::remove_all(d3);
}

TEST_CASE("a failing feature is reported without stopping the others") {
  // "solo" has a single level, so there is nothing to permute.
  std::istringstream in("feature_id,batch_id,level,value\nok,a,1,1\nok,a,1,2\nok,b,2,3\nok,b,2,5\nsolo,c,1,1\nsolo,c,1,2\n");
  auto features = ingest(in);
  AnalysisConfig c;
  c.perms = 19;
  c.grid_size = 4;
  auto r = run_analysis(features, c);
  CHECK(r.failures() == 1);
  CHECK(r.exit_code() == 1);
  CHECK(r.features[0].error.empty());
  CHECK_FALSE(r.features[1].error.empty());
}
