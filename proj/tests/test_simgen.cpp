#include <doctest.h>

#include <vector>

#include "trends/error.hpp"
#include "trends/simgen.hpp"
#include "trends/trend_fit.hpp"
#include "trends/wasserstein.hpp"

using namespace trends;

namespace {

bool trending(const std::vector<QuantileFunction>& q) {
  std::vector<double> v;
  for (const auto& f : q) v.insert(v.end(), f.values().begin(), f.values().end());
  return is_trending(v, q.size(), q.front().size());
}

}  // namespace

TEST_CASE("negative binomial quantiles") {
  CHECK(nb_quantile(5, 0.3, 0.5) == 11);
  CHECK(nb_quantile(5, 0.5, 0.01) == 0);
  CHECK(nb_quantile(5, 0.8, 0.99) == 5);
  CHECK(nb_quantile(5, 0.5, 0.5) == 4);
  CHECK(nb_mixture_quantile(5, 0.3, 0.7, 0.4, 0.1) == 1);
  CHECK(nb_mixture_quantile(5, 0.3, 0.7, 0.4, 0.5) == 6);
  CHECK(nb_mixture_quantile(5, 0.3, 0.7, 0.4, 0.9) == 17);
}

TEST_CASE("model table") {
  CHECK(parse_model("S2") == SimModel::S2);
  CHECK_THROWS(parse_model("S9"));
  CHECK(model_levels(SimModel::R3) == 7);
  CHECK(model_trending(SimModel::R2));
  CHECK_FALSE(model_trending(SimModel::S3));
  CHECK_FALSE(model_trending(SimModel::R3));
  CHECK(true_delta(SimModel::R3) == doctest::Approx(1.0));
}

TEST_CASE("truths follow the model labels") {
  auto g = default_grid(50);
  for (SimModel m : {SimModel::S1, SimModel::S2, SimModel::R1, SimModel::R2})
    CHECK(trending(true_quantiles(m, g)));
  CHECK_FALSE(trending(true_quantiles(SimModel::R3, g)));
}

TEST_CASE("generation is deterministic in the seed and shaped by the spec") {
  auto g = default_grid(20);
  SimSpec s{SimModel::S1, 50, 2, 0.1, dataset_seed(7, SimModel::S1, 3)};
  auto a = generate(s, g), b = generate(s, g);
  REQUIRE(a.batches.size() == static_cast<std::size_t>(2 * model_levels(SimModel::S1)));
  CHECK(a.batches.front().samples.size() == 50);
  CHECK(a.batches.front().level == 1);
  CHECK(a.batches.back().level == model_levels(SimModel::S1));
  for (std::size_t i = 0; i < a.batches.size(); ++i) CHECK(a.batches[i].samples == b.batches[i].samples);
  s.seed = dataset_seed(7, SimModel::S1, 4);
  CHECK(generate(s, g).batches.front().samples != a.batches.front().samples);
  CHECK(dataset_seed(7, SimModel::S1, 3) != dataset_seed(7, SimModel::S2, 3));
}

TEST_CASE("fixtures") {
  auto g = default_grid(20);
  std::vector<double> base_v;
  for (std::size_t k = 0; k < g->size(); ++k) base_v.push_back(g->prob(k) * g->prob(k));
  QuantileFunction base(g, base_v);
  std::vector<double> shifts{0.0, 0.5, 0.7};
  auto so = stochastic_order_fixture(base, shifts);
  CHECK(so.size() == 3);
  CHECK(trending(so));
  std::vector<double> bad{0.0, 0.5, 0.2};
  CHECK_THROWS_AS(stochastic_order_fixture(base, bad), PreconditionError);

  std::vector<double> last_v(base_v);
  for (double& v : last_v) v = 3.0 * v - 1.0;
  QuantileFunction last(g, last_v);
  std::vector<double> omega{1.0, 0.6, 0.2, 0.0};
  auto qm = quantile_mixture_fixture(base, last, omega);
  CHECK(trending(qm));
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(qm[1][k] == doctest::Approx(0.6 * base_v[k] + 0.4 * last_v[k]));

  std::vector<double> means{0.0, 2.0, 4.0};
  std::vector<std::vector<double>> forward{{1, 0, 0}, {0.5, 0.5, 0}, {0, 0.5, 0.5}};
  CHECK(migration_graph_ok(forward));
  CHECK(mixture_migration_fixture(g, means, 0.5, forward).size() == 3);
  // An acceptable graph whose level distributions still cross twice.
  std::vector<std::vector<double>> twice{{0.5, 0, 0.5}, {0.25, 0.25, 0.5}, {0.25, 0.5, 0.25}};
  CHECK(migration_graph_ok(twice));
  CHECK_THROWS_AS(mixture_migration_fixture(g, means, 0.5, twice), PreconditionError);
  CHECK_FALSE(migration_graph_ok(std::vector<std::vector<double>>{{1, 0, 0}, {0, 1, 0}, {1, 0, 0}}));
}

TEST_CASE("Wasserstein error and classification metrics") {
  auto g = default_grid(5);
  std::vector<QuantileFunction> a{QuantileFunction(g, {0, 1, 2, 3})}, b{QuantileFunction(g, {1, 2, 3, 4})};
  CHECK(wasserstein_error(a, b) == doctest::Approx(0.8));

  std::vector<double> p{0.01, 0.5, 0.01, 0.2}, stat{0.9, 0.1, 0.5, 0.3};
  bool t[] = {true, false, false, true};
  auto m = classification_metrics(p, t, stat, 0.05);
  CHECK(m.fpr == doctest::Approx(0.5));
  CHECK(m.tpr == doctest::Approx(0.5));
  CHECK(m.auroc == doctest::Approx(0.75));
  std::vector<double> same(4, 0.3);
  CHECK(classification_metrics(same, t, same, 0.05).auroc == doctest::Approx(0.5));
}
