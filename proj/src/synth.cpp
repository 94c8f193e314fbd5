#include "fcurve/synth.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fcurve/errors.hpp"
#include "fcurve/rng.hpp"
#include "fcurve/serialization.hpp"
#include "fcurve/training.hpp"

namespace fcurve {
namespace {

constexpr std::int64_t kBaseTimestamp = 1362076081;
constexpr const char* kPartsOfSpeech[] = {"n", "vblex", "adj", "adv"};

std::string shortest(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

LinearWeights hlr_truth() {
  return {{"bias", -2.0}, {"sqrt_seen", -1.0}, {"sqrt_correct", 2.0}};
}

// Complexity shortens the half-life more than any other word feature.
LinearWeights hlr_plus_truth() {
  return {{"bias", 1.0},          {"sqrt_seen", -0.3},     {"sqrt_correct", 0.6},
          {"user_id", 0.2},       {"concreteness", 0.5},   {"percent_known", 0.8},
          {"subtlex", 0.1},       {"complexity", -2.5}};
}

}  // namespace

std::string_view to_string(NoiseModel noise) {
  return noise == NoiseModel::binomial ? "binomial" : "deterministic_p";
}

NoiseModel noise_model_from_string(std::string_view name) {
  if (name == "binomial") return NoiseModel::binomial;
  if (name == "deterministic_p" || name == "deterministic") return NoiseModel::deterministic_p;
  throw ConfigError("unknown noise model '" + std::string(name) + "'");
}

void validate(const SynthSpec& spec, const Clip& clip) {
  if (spec.num_users < 1 || spec.num_words < 1 || spec.events_per_pair < 1) {
    throw ConfigError("synth: user, word and per-pair event counts must be positive");
  }
  if (!(spec.delta_min_days > 0 && spec.delta_min_days < spec.delta_max_days)) {
    throw ConfigError("synth: need 0 < delta_min < delta_max");
  }
  if (spec.delta_min_days < clip.h_min || spec.delta_max_days > clip.h_max) {
    throw ConfigError("synth: delta bounds must lie inside the half-life clip range");
  }
  if (spec.session_seen_min < 1 || spec.session_seen_max < spec.session_seen_min) {
    throw ConfigError("synth: need 1 <= session_seen_min <= session_seen_max");
  }
  if (spec.history_seen_max < 1) throw ConfigError("synth: history_seen_max must be positive");
  if (!(spec.complexity_min >= 0 && spec.complexity_min < spec.complexity_max)) {
    throw ConfigError("synth: need 0 <= complexity_min < complexity_max");
  }
}

Parameters default_truth_parameters(ModelKind kind, int hidden_dim, std::uint64_t seed) {
  Parameters p;
  switch (kind) {
    case ModelKind::pimsleur:
    case ModelKind::leitner:
      break;
    case ModelKind::linreg:
      p.theta = {{"bias", 0.9},          {"sqrt_seen", -0.05},  {"sqrt_correct", 0.05},
                 {"percent_known", 0.1}, {"complexity", -0.2}, {"delta", -0.01}};
      break;
    case ModelKind::hlr:
    case ModelKind::hlr_lex:
      p.theta = hlr_truth();
      break;
    case ModelKind::hlr_plus:
    case ModelKind::c_hlr_plus:
      p.theta = hlr_plus_truth();
      break;
    case ModelKind::n_hlr_plus:
    case ModelKind::cn_hlr_plus: {
      Hyperparameters h = default_hyperparameters(kind);
      h.hidden_dim = hidden_dim;
      h.seed = seed;
      p = initial_state(kind, h, FeaturePipeline{}).params;
      break;
    }
  }
  return p;
}

LexiconBundle SynthDataset::lexicons() const {
  LexiconLoadResult loaded;
  for (const auto& w : words) {
    LexicalFeatures f;
    f.complexity = w.complexity;
    f.concreteness = w.concreteness;
    f.percent_known = w.percent_known;
    f.log_frequency = std::log10(static_cast<double>(w.frequency_count) + 1.0);
    loaded.entries.emplace(w.word, f);
  }
  LexiconBundle bundle;
  bundle.merge(loaded);
  return bundle;
}

SynthDataset generate(const SynthSpec& spec, const Clip& clip) {
  validate(spec, clip);
  Rng rng(derive_seed(spec.seed, "synth"));
  SynthDataset data;

  data.words.reserve(static_cast<std::size_t>(spec.num_words));
  for (int w = 0; w < spec.num_words; ++w) {
    SyntheticWord word;
    char name[32];
    std::snprintf(name, sizeof name, "w%05d", w);
    word.word = name;
    const char* pos = kPartsOfSpeech[w % std::size(kPartsOfSpeech)];
    word.lexeme_string = word.word + "/" + word.word + "<" + pos + "><sg>";
    char id[40];
    std::snprintf(id, sizeof id, "%016llx%016llx",
                  static_cast<unsigned long long>(splitmix64(spec.seed ^ static_cast<std::uint64_t>(w))),
                  static_cast<unsigned long long>(splitmix64(static_cast<std::uint64_t>(w) + 1)));
    word.lexeme_id = id;
    word.concreteness = 1.0 + 4.0 * uniform01(rng);
    word.percent_known = uniform01(rng);
    word.frequency_count = std::llround(std::pow(10.0, 5.0 * uniform01(rng))) - 1;
    word.complexity = uniform(rng, spec.complexity_min, spec.complexity_max);
    data.words.push_back(std::move(word));
  }

  const double log_lo = std::log(spec.delta_min_days);
  const double log_hi = std::log(spec.delta_max_days);
  data.events.reserve(spec.num_events());
  for (int u = 0; u < spec.num_users; ++u) {
    char user[32];
    std::snprintf(user, sizeof user, "u%05d", u);
    for (const auto& word : data.words) {
      for (int k = 0; k < spec.events_per_pair; ++k) {
        ReviewEvent ev;
        ev.user_id = user;
        ev.lexeme_id = word.lexeme_id;
        ev.lexeme_string = word.lexeme_string;
        ev.ui_language = "es";
        ev.history_seen = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.history_seen_max)));
        ev.history_correct = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ev.history_seen) + 1));
        // Whole seconds, so the value survives the log's seconds column.
        const double seconds = std::round(std::exp(uniform(rng, log_lo, log_hi)) * kSecondsPerDay);
        ev.delta_days = seconds / kSecondsPerDay;
        ev.session_seen = spec.session_seen_min +
                          static_cast<int>(uniform_index(
                              rng, static_cast<std::uint64_t>(spec.session_seen_max - spec.session_seen_min + 1)));
        data.events.push_back(std::move(ev));
      }
    }
  }
  shuffle(std::span(data.events), rng);
  for (std::size_t i = 0; i < data.events.size(); ++i) {
    data.events[i].timestamp = kBaseTimestamp + static_cast<std::int64_t>(i) * 37;
  }

  const auto lexicons = data.lexicons();
  FeaturePipeline pipeline;
  pipeline.flags = default_feature_flags(spec.truth_kind);
  pipeline.users = build_user_index(data.events);
  pipeline.stats = fit_normalization(data.events, lexicons, pipeline.users);

  Hyperparameters hyper = default_hyperparameters(spec.truth_kind);
  hyper.seed = spec.seed;
  auto& truth = data.ground_truth;
  truth = initial_state(spec.truth_kind, hyper, pipeline, clip);
  truth.params = spec.truth ? *spec.truth
                            : default_truth_parameters(spec.truth_kind, hyper.hidden_dim, spec.seed);
  if (is_neural(spec.truth_kind)) truth.hyper.neural_bias = truth.params.net.has_bias;
  validate(truth);

  data.true_recall.reserve(data.events.size());
  for (auto& ev : data.events) {
    const auto fv = extract_features(ev, lexicons, pipeline.users, pipeline.stats, pipeline.flags);
    const double p = predict(truth, fv, ev.delta_days).p_hat;
    data.true_recall.push_back(p);
    if (spec.noise == NoiseModel::binomial) {
      ev.session_correct = binomial(rng, ev.session_seen, p);
      ev.observed_recall = static_cast<double>(ev.session_correct) / ev.session_seen;
    } else {
      // Exact p in memory; the counts are the nearest representable ratio.
      ev.session_correct = static_cast<int>(std::lround(p * ev.session_seen));
      ev.observed_recall = p;
    }
  }
  return data;
}

SynthFiles synth_file_paths(const std::string& dir) {
  const std::filesystem::path base(dir);
  return {(base / "reviews.csv").string(), (base / "complexity.csv").string(),
          (base / "concreteness.csv").string(), (base / "subtlex.csv").string(),
          (base / "ground_truth.json").string()};
}

SynthFiles write_synth_files(const SynthDataset& data, const std::string& dir) {
  const auto files = synth_file_paths(dir);
  std::ostringstream reviews;
  write_review_log(reviews, data.events, "en");
  write_file_atomic(files.reviews, reviews.str());

  std::string complexity = "word,complexity\n";
  std::string concreteness = "Word,Conc.M,Percent_known\n";
  std::string subtlex = "Word,FREQcount\n";
  for (const auto& w : data.words) {
    complexity += w.word + "," + shortest(w.complexity) + "\n";
    concreteness += w.word + "," + shortest(w.concreteness) + "," + shortest(w.percent_known) + "\n";
    subtlex += w.word + "," + std::to_string(w.frequency_count) + "\n";
  }
  write_file_atomic(files.complexity, complexity);
  write_file_atomic(files.concreteness, concreteness);
  write_file_atomic(files.subtlex, subtlex);
  save_model(files.ground_truth, data.ground_truth);
  return files;
}

std::vector<LexiconSource> synth_lexicon_sources(const SynthFiles& files) {
  return {{files.complexity, LexiconKind::complexity, {}},
          {files.concreteness, LexiconKind::concreteness_norms, {}},
          {files.subtlex, LexiconKind::subtlex, {}}};
}

}  // namespace fcurve
