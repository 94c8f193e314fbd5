#include <doctest.h>

#include <cmath>

#include "fcurve/errors.hpp"
#include "fcurve/evaluation.hpp"
#include "fcurve/rng.hpp"
#include "fcurve/synth.hpp"
#include "fcurve/training.hpp"

using namespace fcurve;

namespace {

ModelState bare_state(ModelKind kind, const Hyperparameters& hyper) {
  ModelState s;
  s.kind = kind;
  s.hyper = hyper;
  s.flags = default_feature_flags(kind);
  s.dense_order = canonical_dense_order();
  return s;
}

TrainingExample example(double p, double delta, const FeatureVector& fv, const Clip& clip = {}) {
  TrainingExample ex;
  ex.features = fv;
  ex.delta_days = delta;
  ex.observed_recall = p;
  ex.observed_h = observed_half_life(p, delta, clip);
  return ex;
}

FeatureVector random_features(Rng& rng, bool tags) {
  FeatureVector fv;
  fv.history_seen = 1 + static_cast<int>(uniform_index(rng, 8));
  fv.history_correct = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(fv.history_seen) + 1));
  fv.interaction = std::array<double, 2>{std::sqrt(1.0 + fv.history_seen),
                                         std::sqrt(1.0 + fv.history_correct)};
  for (double& v : fv.dense) v = uniform(rng, 0.05, 1.0);
  fv.complexity_raw = uniform(rng, 0.5, 2.0);
  if (tags) fv.sparse_tags = {"tag:w<n>"};
  return fv;
}

// Central differences of the total loss, written independently of the
// library's own checker.
double fd(const ModelState& s, const TrainingExample& ex, double& param) {
  const double h = 1e-6;
  const double saved = param;
  param = saved + h;
  const double up = example_loss(s, ex).total;
  param = saved - h;
  const double down = example_loss(s, ex).total;
  param = saved;
  return (up - down) / (2.0 * h);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// True when the point is safely inside every clip, so finite differences
// see a smooth function.
bool interior(const ModelState& s, const TrainingExample& ex) {
  const auto p = predict(s, ex.features, ex.delta_days);
  const Clip& c = s.clip;
  if (s.kind == ModelKind::linreg) {
    const auto terms = linear_terms(s.kind, ex.features, ex.delta_days);
    const double raw = linreg_raw(s.params.theta, terms);
    return raw > 0.01 && raw < 0.99;
  }
  if (p.h_hat < c.h_min * 1.01 || p.h_hat > c.h_max * 0.99) return false;
  if (p.p_hat < c.p_min * 1.5 || p.p_hat > c.p_max - 1e-4) return false;
  if (is_neural(s.kind)) {
    for (double z : neural_forward(s.params.net, ex.features.dense).pre) {
      if (std::abs(z) < 1e-3) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("loss examples") {
  Hyperparameters hyper;
  hyper.lambda = 0.0;
  hyper.alpha = 0.01;
  const Parameters none;
  CHECK(loss(0.7, 0.7, 2.0, 2.0, none, hyper).total == 0.0);

  hyper.alpha = 0.0;
  CHECK(loss(0.6, 0.5, 1.0, 1.0, none, hyper).total == doctest::Approx(0.01).epsilon(1e-12));

  hyper.alpha = 0.01;
  CHECK(loss(0.5, 0.5, 3.0, 1.0, none, hyper).total == doctest::Approx(0.04).epsilon(1e-12));

  Parameters params;
  params.theta = {{"bias", 10.0}, {"sqrt_seen", 2.0}, {"tag:x", -1.0}};
  hyper.lambda = 0.1;
  const auto b = loss(0.5, 0.4, 1.0, 1.0, params, hyper);
  CHECK(b.reg_term == doctest::Approx(0.5));  // bias excluded
  CHECK(b.total == doctest::Approx(b.p_term + b.h_term + b.reg_term));
  CHECK(squared_weight_norm(params) == 5.0);
}

TEST_CASE("gradient is zero at a perfect fit with zero weights") {
  Hyperparameters hyper;
  auto s = bare_state(ModelKind::hlr, hyper);
  FeatureVector fv;
  fv.interaction = std::array<double, 2>{1.0, 1.0};
  const auto g = gradient(s, example(0.5, 1.0, fv));
  for (const auto& [key, v] : g.theta) CHECK(v == 0.0);
}

TEST_CASE("analytic gradient matches independent finite differences") {
  Rng rng(321);
  for (ModelKind kind : kTrainableKinds) {
    CAPTURE(to_string(kind));
    int checked = 0;
    for (int attempt = 0; checked < 40 && attempt < 4000; ++attempt) {
      Hyperparameters hyper;
      hyper.alpha = uniform(rng, 0.0, 0.05);
      hyper.lambda = uniform(rng, 0.0, 0.2);
      hyper.neural_bias = attempt % 2 == 1;
      auto s = bare_state(kind, hyper);
      const auto fv = random_features(rng, kind == ModelKind::hlr_lex);
      const double delta = std::exp(uniform(rng, -2.0, 2.5));
      if (is_neural(kind)) {
        s.params.net = NeuralWeights::zeros(kNumDense, 4, hyper.neural_bias);
        for (double& w : s.params.net.w1) w = uniform(rng, -1.0, 1.0);
        for (double& w : s.params.net.w2) w = uniform(rng, 0.2, 3.0);
        for (double& w : s.params.net.b1) w = uniform(rng, -0.5, 0.5);
        s.params.net.b2 = hyper.neural_bias ? uniform(rng, 0.0, 1.0) : 0.0;
      } else {
        for (const auto& t : linear_terms(kind, fv, delta)) {
          s.params.theta[std::string(t.key)] =
              kind == ModelKind::linreg ? uniform(rng, -0.2, 0.2) : uniform(rng, -0.5, 0.5);
        }
      }
      const auto ex = example(uniform(rng, 0.05, 0.95), delta, fv);
      if (!interior(s, ex)) continue;
      ++checked;

      const auto g = gradient(s, ex);
      if (is_neural(kind)) {
        auto& net = s.params.net;
        for (std::size_t i = 0; i < net.w1.size(); ++i) {
          CHECK(rel_err(g.net.w1[i], fd(s, ex, net.w1[i])) < 1e-4);
        }
        for (std::size_t j = 0; j < net.w2.size(); ++j) {
          CHECK(rel_err(g.net.w2[j], fd(s, ex, net.w2[j])) < 1e-4);
        }
        for (std::size_t j = 0; j < net.b1.size(); ++j) {
          CHECK(rel_err(g.net.b1[j], fd(s, ex, net.b1[j])) < 1e-4);
        }
        if (net.has_bias) CHECK(rel_err(g.net.b2, fd(s, ex, net.b2)) < 1e-4);
      } else {
        for (auto& [key, w] : s.params.theta) {
          CAPTURE(key);
          if (kind == ModelKind::linreg && key == "delta" && std::abs(w) < 1e-4) continue;
          const auto it = g.theta.find(key);
          const double analytic = it == g.theta.end() ? 0.0 : it->second;
          CHECK(rel_err(analytic, fd(s, ex, w)) < 1e-4);
        }
      }
    }
    CHECK(checked == 40);
  }
}

TEST_CASE("library gradient check passes for every trainable kind") {
  for (ModelKind kind : kTrainableKinds) {
    const auto report = gradient_check(kind, 100, 7);
    CAPTURE(to_string(kind));
    CHECK(report.trials == 100);
    CHECK(report.passed);
    CHECK(report.max_relative_error < kGradientCheckTolerance);
  }
}

TEST_CASE("inactive ReLU unit passes no gradient to its W1 column") {
  Hyperparameters hyper;
  hyper.lambda = 0.0;
  auto s = bare_state(ModelKind::n_hlr_plus, hyper);
  auto& net = s.params.net;
  net = NeuralWeights::zeros(kNumDense, 4, false);
  for (std::size_t i = 0; i < kNumDense; ++i) {
    for (std::size_t j = 0; j < 4; ++j) net.w1_at(i, j) = j == 2 ? -1.0 : 0.5;
  }
  net.w2 = {1.0, 1.0, 1.0, 1.0};
  FeatureVector fv;
  fv.dense = {0.2, 0.4, 0.6, 0.8, 1.0};
  const auto g = gradient(s, example(0.3, 2.0, fv));
  for (std::size_t i = 0; i < kNumDense; ++i) {
    CHECK(g.net.w1[i * 4 + 2] == 0.0);
    CHECK(g.net.w1[i * 4 + 0] != 0.0);
  }
  CHECK(g.net.w2[2] == 0.0);
}

TEST_CASE("engaged clips are stop-gradients") {
  Hyperparameters hyper;
  hyper.lambda = 0.0;
  FeatureVector fv;
  fv.interaction = std::array<double, 2>{1.0, 1.0};

  SUBCASE("half-life above h_max") {
    auto s = bare_state(ModelKind::hlr, hyper);
    s.params.theta = {{"bias", 20.0}};
    const auto g = gradient(s, example(0.3, 1.0, fv));
    CHECK(g.theta.at("bias") == 0.0);
  }
  SUBCASE("half-life below h_min") {
    auto s = bare_state(ModelKind::hlr, hyper);
    s.params.theta = {{"bias", -20.0}};
    const auto g = gradient(s, example(0.3, 1.0, fv));
    CHECK(g.theta.at("bias") == 0.0);
  }
  SUBCASE("neural output under the floor") {
    auto s = bare_state(ModelKind::n_hlr_plus, hyper);
    s.params.net = NeuralWeights::zeros(kNumDense, 4, false);
    for (double& w : s.params.net.w1) w = 0.001;
    s.params.net.w2 = {0.001, 0.001, 0.001, 0.001};
    fv.dense = {1, 1, 1, 1, 1};
    const auto g = gradient(s, example(0.3, 1.0, fv));
    for (double v : g.net.w1) CHECK(v == 0.0);
    for (double v : g.net.w2) CHECK(v == 0.0);
  }
}

TEST_CASE("one SGD step moves the weights by exactly -lr * gradient") {
  Rng rng(8);
  for (ModelKind kind : {ModelKind::hlr, ModelKind::hlr_plus, ModelKind::c_hlr_plus,
                         ModelKind::linreg, ModelKind::n_hlr_plus}) {
    CAPTURE(to_string(kind));
    Hyperparameters hyper = default_hyperparameters(kind);
    hyper.epochs = 1;
    hyper.minibatch_size = 1;
    hyper.learning_rate = 0.05;
    hyper.lambda = 0.1;
    auto s = bare_state(kind, hyper);
    const auto fv = random_features(rng, false);
    if (is_neural(kind)) {
      s.params.net = NeuralWeights::zeros(kNumDense, 4, false);
      for (double& w : s.params.net.w1) w = uniform(rng, -1.0, 1.0);
      for (double& w : s.params.net.w2) w = uniform(rng, 0.5, 2.0);
    } else {
      for (const auto& t : linear_terms(kind, fv, 1.0)) {
        s.params.theta[std::string(t.key)] = uniform(rng, -0.1, 0.1);
      }
      s.params.theta["tag:inactive"] = 0.3;  // decays through L2 only
    }
    const std::vector<TrainingExample> batch = {example(0.7, 1.5, fv)};
    const auto g = gradient(s, batch[0]);
    auto expected = s.params;
    add_scaled(expected, g, -hyper.learning_rate);
    const auto r = train_model(s, batch, hyper);
    if (is_neural(kind)) {
      for (std::size_t i = 0; i < expected.net.w1.size(); ++i) {
        CHECK(r.state.params.net.w1[i] == doctest::Approx(expected.net.w1[i]).epsilon(1e-12));
      }
      for (std::size_t j = 0; j < expected.net.w2.size(); ++j) {
        CHECK(r.state.params.net.w2[j] == doctest::Approx(expected.net.w2[j]).epsilon(1e-12));
      }
    } else {
      for (const auto& [key, w] : expected.theta) {
        CAPTURE(key);
        CHECK(r.state.params.theta.at(key) == doctest::Approx(w).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("weights decay geometrically when residuals are zero") {
  Hyperparameters hyper;
  hyper.learning_rate = 0.01;
  hyper.lambda = 0.5;
  hyper.epochs = 50;
  auto s = bare_state(ModelKind::hlr, hyper);
  // sqrt(1+3) * w + sqrt(1+1) * v = 0 keeps h_hat = 1 at every scale.
  FeatureVector fv;
  fv.history_seen = 3;
  fv.history_correct = 1;
  fv.interaction = std::array<double, 2>{2.0, std::sqrt(2.0)};
  const double w0 = 0.8;
  s.params.theta = {{"sqrt_seen", w0}, {"sqrt_correct", -w0 * 2.0 / std::sqrt(2.0)}};
  const std::vector<TrainingExample> data = {example(0.5, 1.0, fv)};
  const auto r = train_model(s, data, hyper);
  const double factor = std::pow(1.0 - 2.0 * hyper.learning_rate * hyper.lambda, hyper.epochs);
  CHECK(r.state.params.theta.at("sqrt_seen") == doctest::Approx(w0 * factor).epsilon(1e-9));
}

TEST_CASE("zero epochs returns the initial state") {
  SynthSpec spec;
  spec.num_users = 5;
  spec.num_words = 10;
  spec.events_per_pair = 2;
  const auto data = generate(spec);
  for (ModelKind kind : {ModelKind::hlr, ModelKind::n_hlr_plus}) {
    auto hyper = default_hyperparameters(kind);
    hyper.epochs = 0;
    hyper.seed = 4;
    const auto lex = data.lexicons();
    const auto r = sgd_train(data.events, kind, lex, hyper);
    const auto pipeline = fit_feature_pipeline(data.events, lex, default_feature_flags(kind));
    const auto init = initial_state(kind, hyper, pipeline);
    CHECK(r.state.params == init.params);
    CHECK(r.log.empty());
  }
}

TEST_CASE("neural initialization") {
  const FeaturePipeline pipeline{default_feature_flags(ModelKind::n_hlr_plus), {}, {}};
  auto hyper = default_hyperparameters(ModelKind::n_hlr_plus);
  hyper.seed = 17;
  const auto a = initial_state(ModelKind::n_hlr_plus, hyper, pipeline);
  const auto b = initial_state(ModelKind::n_hlr_plus, hyper, pipeline);
  CHECK(a.params == b.params);
  REQUIRE(a.params.net.w1.size() == kNumDense * 4);
  for (double w : a.params.net.w1) CHECK(std::abs(w) <= 0.1);
  for (double w : a.params.net.w2) {
    CHECK(w >= 0.0);
    CHECK(w <= std::sqrt(6.0 / 4.0));
  }
  hyper.seed = 18;
  CHECK_FALSE(initial_state(ModelKind::n_hlr_plus, hyper, pipeline).params == a.params);
  CHECK(initial_state(ModelKind::hlr, hyper, pipeline).params.theta.empty());
}

TEST_CASE("training is deterministic and independent of the worker count") {
  SynthSpec spec;
  spec.num_users = 20;
  spec.num_words = 30;
  spec.events_per_pair = 3;
  spec.truth_kind = ModelKind::c_hlr_plus;
  spec.seed = 3;
  const auto data = generate(spec);
  const auto lex = data.lexicons();
  for (ModelKind kind : {ModelKind::hlr_lex, ModelKind::c_hlr_plus, ModelKind::cn_hlr_plus}) {
    CAPTURE(to_string(kind));
    auto hyper = default_hyperparameters(kind);
    hyper.seed = 99;
    if (is_neural(kind)) {
      hyper.epochs = 3;
      hyper.minibatch_size = 700;  // spans several reduction chunks
    }
    const auto a = sgd_train(data.events, kind, lex, hyper);
    const auto b = sgd_train(data.events, kind, lex, hyper);
    hyper.workers = 4;
    const auto c = sgd_train(data.events, kind, lex, hyper);
    CHECK(a.state.params == b.state.params);
    CHECK(a.state.params == c.state.params);
    hyper.seed = 100;
    const auto d = sgd_train(data.events, kind, lex, hyper);
    CHECK_FALSE(a.state.params == d.state.params);
  }
}

TEST_CASE("epoch log and loss trend") {
  SynthSpec spec;
  spec.num_users = 30;
  spec.num_words = 40;
  spec.events_per_pair = 5;
  spec.truth_kind = ModelKind::c_hlr_plus;
  spec.noise = NoiseModel::deterministic_p;
  spec.seed = 12;
  const auto data = generate(spec);
  auto hyper = default_hyperparameters(ModelKind::n_hlr_plus);
  hyper.epochs = 12;
  hyper.minibatch_size = 32;
  hyper.learning_rate = 0.01;
  hyper.alpha = 0.0;
  hyper.lambda = 0.0;
  int callbacks = 0;
  const auto r = sgd_train(data.events, ModelKind::n_hlr_plus, data.lexicons(), hyper, Clip{},
                           [&](const EpochLog&) { ++callbacks; });
  REQUIRE(r.log.size() == 12);
  CHECK(callbacks == 12);
  CHECK(r.train_events == data.events.size());
  for (std::size_t e = 0; e < r.log.size(); ++e) {
    CHECK(r.log[e].epoch == static_cast<int>(e));
    CHECK(r.log[e].total == doctest::Approx(r.log[e].p_term + r.log[e].h_term + r.log[e].reg_term));
    if (e > 0) CHECK(r.log[e].total <= r.log[e - 1].total * 1.05);
  }
  CHECK(r.log.back().total < r.log.front().total);
}

TEST_CASE("divergence is reported with the epoch") {
  SynthSpec spec;
  spec.num_users = 5;
  spec.num_words = 10;
  spec.events_per_pair = 2;
  const auto data = generate(spec);
  auto hyper = default_hyperparameters(ModelKind::hlr_plus);
  hyper.lambda = 0.0;
  hyper.learning_rate = 1e200;
  CHECK_THROWS_WITH_AS(sgd_train(data.events, ModelKind::hlr_plus, data.lexicons(), hyper),
                       doctest::Contains("epoch 0"), DivergenceError);
}

TEST_CASE("schedules train to an empty parameter set") {
  SynthSpec spec;
  spec.num_users = 5;
  spec.num_words = 10;
  spec.events_per_pair = 2;
  const auto data = generate(spec);
  const auto r = sgd_train(data.events, ModelKind::leitner, data.lexicons(),
                           default_hyperparameters(ModelKind::leitner));
  CHECK(r.state.params.theta.empty());
  CHECK(r.state.params.net.empty());
}

TEST_CASE("HLR recovers a known ground truth") {
  SynthSpec spec;
  spec.num_users = 50;
  spec.num_words = 100;
  spec.events_per_pair = 10;
  spec.session_seen_min = 20;
  spec.session_seen_max = 40;
  spec.seed = 21;
  const auto data = generate(spec);
  const auto split = split_train_test(data.events, {0.9, 5, SplitMode::random});
  auto hyper = default_hyperparameters(ModelKind::hlr);
  hyper.alpha = 0.0;
  hyper.lambda = 0.0;
  hyper.learning_rate = 0.01;
  hyper.epochs = 10;
  const auto lex = data.lexicons();
  const auto r = sgd_train(split.train, ModelKind::hlr, lex, hyper);
  const double trained = evaluate(r.state, split.test, lex).mae;
  const double truth = evaluate(data.ground_truth, split.test, lex).mae;
  CHECK(trained < truth + 0.01);
  CHECK(trained < 0.05);
  const auto& theta = r.state.params.theta;
  const auto& star = data.ground_truth.params.theta;
  for (const std::string key : {"bias", "sqrt_seen", "sqrt_correct"}) {
    CAPTURE(key);
    CHECK(theta.at(key) == doctest::Approx(star.at(key)).epsilon(0.15));
  }
}
