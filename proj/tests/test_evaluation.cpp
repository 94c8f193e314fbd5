#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <utility>

#include "fcurve/errors.hpp"
#include "fcurve/evaluation.hpp"
#include "fcurve/rng.hpp"
#include "fcurve/serialization.hpp"
#include "fcurve/synth.hpp"
#include "fcurve/training.hpp"
#include "test_util.hpp"

using namespace fcurve;
using fcurve::testing::make_event;

namespace {

ModelState neural_with(std::vector<double> w1) {
  ModelState s;
  s.kind = ModelKind::n_hlr_plus;
  s.dense_order = canonical_dense_order();
  s.params.net = NeuralWeights::zeros(kNumDense, 4, false);
  s.params.net.w1 = std::move(w1);
  s.params.net.w2 = {1, 1, 1, 1};
  return s;
}

}  // namespace

TEST_CASE("mae examples") {
  using P = std::pair<double, double>;
  const std::vector<P> perfect = {{1, 1}, {0, 0}};
  const std::vector<P> worst = {{1, 0}};
  const std::vector<P> mixed = {{0.8, 0.6}, {0.4, 0.5}};
  CHECK(mae(perfect) == 0.0);
  CHECK(mae(worst) == 1.0);
  CHECK(mae(mixed) == doctest::Approx(0.15).epsilon(1e-12));
  CHECK_THROWS_AS(mae(std::span<const P>{}), InputError);
}

TEST_CASE("mae is permutation invariant and bounded") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::pair<double, double>> pairs(1 + uniform_index(rng, 50));
    for (auto& [a, b] : pairs) a = uniform01(rng), b = uniform01(rng);
    const double m = mae(pairs);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
    auto shuffled = pairs;
    shuffle(std::span(shuffled), rng);
    CHECK(mae(shuffled) == doctest::Approx(m).epsilon(1e-12));
  }
}

TEST_CASE("a constant predictor scores the mean absolute deviation") {
  std::vector<double> obs = {0.0, 0.25, 0.5, 1.0, 1.0, 0.75};
  double mean = 0.0;
  for (double v : obs) mean += v;
  mean /= static_cast<double>(obs.size());
  std::vector<std::pair<double, double>> pairs;
  double mad = 0.0;
  for (double v : obs) {
    pairs.emplace_back(v, mean);
    mad += std::abs(v - mean);
  }
  mad /= static_cast<double>(obs.size());
  CHECK(mae(pairs) == doctest::Approx(mad).epsilon(1e-12));
}

TEST_CASE("best constant MAE uses the median") {
  std::vector<ReviewEvent> events;
  for (double p : {0.0, 0.1, 0.2, 0.9, 1.0}) events.push_back(make_event(p, 1.0));
  // Median 0.2: |0-.2|+|.1-.2|+0+|.9-.2|+|1-.2| = 1.8
  CHECK(best_constant_mae(events) == doctest::Approx(1.8 / 5.0).epsilon(1e-12));
}

TEST_CASE("evaluate: zero-weight HLR on unit half-life data is exact") {
  std::vector<ReviewEvent> events;
  for (int i = 0; i < 10; ++i) events.push_back(make_event(0.5, 1.0, "u" + std::to_string(i)));
  ModelState s;
  s.kind = ModelKind::hlr;
  s.flags = default_feature_flags(ModelKind::hlr);
  s.dense_order = canonical_dense_order();
  const auto r = evaluate(s, events, LexiconBundle{});
  CHECK(r.mae == 0.0);
  CHECK(r.num_events == 10);
  CHECK(r.mean_p_hat == 0.5);
  CHECK(r.mean_observed == 0.5);
  CHECK(r.kind == ModelKind::hlr);
  CHECK(r.imputation.events == 10);
}

TEST_CASE("evaluate: read-only, order checked, worker independent") {
  SynthSpec spec;
  spec.num_users = 10;
  spec.num_words = 20;
  spec.events_per_pair = 3;
  const auto data = generate(spec);
  const auto lex = data.lexicons();
  auto hyper = default_hyperparameters(ModelKind::hlr_plus);
  const auto trained = sgd_train(data.events, ModelKind::hlr_plus, lex, hyper).state;

  const auto before = model_to_json(trained).dump();
  const auto one = evaluate(trained, data.events, lex, 1);
  const auto many = evaluate(trained, data.events, lex, 3);
  CHECK(model_to_json(trained).dump() == before);
  CHECK(one.mae == many.mae);
  CHECK(one.mean_p_hat == many.mean_p_hat);

  auto shuffled = trained;
  std::swap(shuffled.dense_order[1], shuffled.dense_order[4]);
  CHECK_THROWS_AS(evaluate(shuffled, data.events, lex), StructuralError);
}

TEST_CASE("hidden weight export") {
  SUBCASE("constant matrix maps to zeros") {
    const auto e = export_hidden_weights(neural_with(std::vector<double>(20, -0.3)));
    for (const auto& row : e.matrix) {
      for (double v : row) CHECK(v == 0.0);
    }
  }
  SUBCASE("unique max maps to one, labels and shape are pinned") {
    std::vector<double> w1(20, 0.1);
    w1[4 * 4 + 2] = -2.0;  // complexity row, third unit; magnitude counts
    w1[0] = 0.0;
    const auto e = export_hidden_weights(neural_with(w1));
    REQUIRE(e.matrix.size() == 5);
    REQUIRE(e.matrix[0].size() == 4);
    CHECK(e.matrix[4][2] == 1.0);
    CHECK(e.matrix[0][0] == 0.0);
    CHECK(e.row_labels == std::vector<std::string>{"user id", "concreteness", "percent known",
                                                   "SUBTLEX", "complexity"});
    CHECK(e.column_labels.size() == 4);
    CHECK(e.ranking().front() == 4);
    CHECK(e.row_means[4] == doctest::Approx((3 * 0.05 + 1.0) / 4.0));
  }
  SUBCASE("ranking ties keep feature order") {
    HiddenWeightExport e;
    e.row_means = {0.2, 0.5, 0.5, 0.1, 0.3};
    CHECK(e.ranking() == std::vector<std::size_t>{1, 2, 4, 0, 3});
  }
  SUBCASE("non-neural kinds are rejected") {
    ModelState s;
    s.kind = ModelKind::hlr;
    s.dense_order = canonical_dense_order();
    CHECK_THROWS_AS(export_hidden_weights(s), InputError);
  }
}

TEST_CASE("ladder table formatting") {
  std::vector<LadderRow> rows(2);
  rows[0].kind = ModelKind::pimsleur;
  rows[0].ok = true;
  rows[0].test.mae = 0.396;
  rows[0].test.num_events = 10;
  rows[1].kind = ModelKind::hlr;
  rows[1].ok = false;
  rows[1].error = "boom";
  const auto text = format_ladder_table(rows);
  CHECK(text.find("pimsleur") != std::string::npos);
  CHECK(text.find("0.396") != std::string::npos);
  CHECK(text.find("FAILED") != std::string::npos);
  CHECK(text.find("boom") != std::string::npos);
}
