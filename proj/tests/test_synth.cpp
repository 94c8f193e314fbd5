#include <doctest.h>

#include <filesystem>
#include <set>

#include "fcurve/errors.hpp"
#include "fcurve/evaluation.hpp"
#include "fcurve/serialization.hpp"
#include "fcurve/synth.hpp"
#include "test_util.hpp"

using namespace fcurve;
using fcurve::testing::TempDir;

namespace {

SynthSpec small(ModelKind truth, NoiseModel noise) {
  SynthSpec spec;
  spec.num_users = 12;
  spec.num_words = 25;
  spec.events_per_pair = 4;
  spec.truth_kind = truth;
  spec.noise = noise;
  spec.seed = 31;
  return spec;
}

}  // namespace

TEST_CASE("synth: ground truth reproduces deterministic data exactly") {
  for (ModelKind kind : {ModelKind::hlr, ModelKind::hlr_plus, ModelKind::c_hlr_plus,
                         ModelKind::n_hlr_plus, ModelKind::cn_hlr_plus}) {
    CAPTURE(to_string(kind));
    const auto data = generate(small(kind, NoiseModel::deterministic_p));
    REQUIRE(data.events.size() == 12 * 25 * 4);
    const auto r = evaluate(data.ground_truth, data.events, data.lexicons());
    CHECK(r.mae <= 1e-12);
    for (std::size_t i = 0; i < data.events.size(); ++i) {
      CHECK(data.events[i].observed_recall == data.true_recall[i]);
    }
  }
}

TEST_CASE("synth: single-review sessions are Bernoulli") {
  auto spec = small(ModelKind::hlr, NoiseModel::binomial);
  spec.session_seen_max = 1;
  const auto data = generate(spec);
  std::set<double> values;
  for (const auto& e : data.events) values.insert(e.observed_recall);
  CHECK(values == std::set<double>{0.0, 1.0});
}

TEST_CASE("synth: binomial recall is a session ratio") {
  auto spec = small(ModelKind::hlr, NoiseModel::binomial);
  spec.session_seen_min = 3;
  spec.session_seen_max = 7;
  for (const auto& e : generate(spec).events) {
    CHECK(e.session_seen >= 3);
    CHECK(e.session_seen <= 7);
    CHECK(e.observed_recall == static_cast<double>(e.session_correct) / e.session_seen);
    CHECK(e.history_correct <= e.history_seen);
  }
}

TEST_CASE("synth: complexity steepens the generated curve") {
  const auto data = generate(small(ModelKind::c_hlr_plus, NoiseModel::deterministic_p));
  const auto lex = data.lexicons();
  // Same half-life and delta for every word; only the multiplier varies.
  const auto& truth = data.ground_truth;
  std::vector<std::pair<double, double>> by_complexity;
  for (const auto& w : data.words) {
    auto e = data.events.front();
    e.lexeme_string = w.lexeme_string;
    const auto fv = extract_features(e, lex, truth.users, truth.stats, truth.flags);
    by_complexity.emplace_back(fv.complexity_raw,
                               recall_probability(2.0, 1.0, complexity_multiplier(truth.kind, fv),
                                                  truth.clip));
  }
  std::sort(by_complexity.begin(), by_complexity.end());
  for (std::size_t i = 1; i < by_complexity.size(); ++i) {
    if (by_complexity[i].first > by_complexity[i - 1].first) {
      CHECK(by_complexity[i].second < by_complexity[i - 1].second);
    }
  }
}

TEST_CASE("synth: deterministic given the seed") {
  const auto a = generate(small(ModelKind::hlr, NoiseModel::binomial));
  const auto b = generate(small(ModelKind::hlr, NoiseModel::binomial));
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].observed_recall == b.events[i].observed_recall);
    CHECK(a.events[i].delta_days == b.events[i].delta_days);
    CHECK(a.events[i].lexeme_string == b.events[i].lexeme_string);
  }
  auto other = small(ModelKind::hlr, NoiseModel::binomial);
  other.seed = 32;
  const auto c = generate(other);
  bool differs = false;
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    differs = differs || a.events[i].delta_days != c.events[i].delta_days;
  }
  CHECK(differs);
}

TEST_CASE("synth: deltas stay in range") {
  const auto spec = small(ModelKind::hlr, NoiseModel::binomial);
  for (const auto& e : generate(spec).events) {
    CHECK(e.delta_days >= spec.delta_min_days - 1.0 / kSecondsPerDay);
    CHECK(e.delta_days <= spec.delta_max_days + 1.0 / kSecondsPerDay);
  }
}

TEST_CASE("synth: validation") {
  auto spec = small(ModelKind::hlr, NoiseModel::binomial);
  CHECK_NOTHROW(validate(spec));
  spec.num_users = 0;
  CHECK_THROWS_AS(validate(spec), ConfigError);
  spec = small(ModelKind::hlr, NoiseModel::binomial);
  spec.delta_min_days = 0.001;  // below h_min
  CHECK_THROWS_AS(validate(spec), ConfigError);
  spec = small(ModelKind::hlr, NoiseModel::binomial);
  spec.session_seen_min = 5;
  spec.session_seen_max = 4;
  CHECK_THROWS_AS(validate(spec), ConfigError);
}

TEST_CASE("synth: files feed the regular loaders unchanged") {
  TempDir dir;
  const auto data = generate(small(ModelKind::c_hlr_plus, NoiseModel::binomial));
  const auto files = write_synth_files(data, dir.path().string());
  for (const auto& p : {files.reviews, files.complexity, files.concreteness, files.subtlex,
                        files.ground_truth}) {
    CHECK(std::filesystem::exists(p));
  }
  const auto log = load_review_log(files.reviews, "en");
  CHECK(log.events.size() == data.events.size());
  CHECK(log.stats.rows_malformed == 0);
  const auto lex = LexiconBundle::load(synth_lexicon_sources(files));
  CHECK(lex.size() == data.words.size());
  const auto truth = load_model(files.ground_truth);
  const auto r = evaluate(truth, log.events, lex);
  const auto in_memory = evaluate(data.ground_truth, data.events, data.lexicons());
  CHECK(r.mae == doctest::Approx(in_memory.mae).epsilon(1e-12));
  CHECK(r.imputation.misses == std::array<std::size_t, kNumDense>{});
}
