#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fcurve/dataset.hpp"
#include "fcurve/features.hpp"
#include "fcurve/model.hpp"

namespace fcurve {

enum class NoiseModel { deterministic_p, binomial };

std::string_view to_string(NoiseModel noise);
NoiseModel noise_model_from_string(std::string_view name);

struct SynthSpec {
  int num_users = 100;
  int num_words = 200;
  int events_per_pair = 10;
  ModelKind truth_kind = ModelKind::hlr;
  // Ground-truth parameters; empty means default_truth_parameters(truth_kind).
  std::optional<Parameters> truth;
  double delta_min_days = 15.0 / (24.0 * 60.0);  // delta is log-uniform on [min, max]
  double delta_max_days = 60.0;
  NoiseModel noise = NoiseModel::binomial;
  int session_seen_min = 1;
  int session_seen_max = 10;
  int history_seen_max = 20;  // history_seen uniform on [1, max]
  double complexity_min = 0.5;
  double complexity_max = 2.0;
  std::uint64_t seed = 0;

  std::size_t num_events() const {
    return static_cast<std::size_t>(num_users) * num_words * events_per_pair;
  }
};

// Throws ConfigError.
void validate(const SynthSpec& spec, const Clip& clip = {});

// Underlying per-word draws and the lexicon values derived from them.
struct SyntheticWord {
  std::string word;
  std::string lexeme_string;
  std::string lexeme_id;
  double complexity = 1.0;
  double concreteness = 3.0;
  double percent_known = 0.5;
  long long frequency_count = 0;
};

struct SynthDataset {
  std::vector<ReviewEvent> events;
  std::vector<double> true_recall;  // p under the ground truth, per event
  ModelState ground_truth;
  std::vector<SyntheticWord> words;

  // The lexicons exactly as write_synth_files() emits them.
  LexiconBundle lexicons() const;
};

// Ground truths used when SynthSpec::truth is empty. Linear kinds get a fixed
// weight vector in which word complexity shortens the half-life; neural
// kinds get seeded random weights.
Parameters default_truth_parameters(ModelKind kind, int hidden_dim, std::uint64_t seed);

SynthDataset generate(const SynthSpec& spec, const Clip& clip = {});

struct SynthFiles {
  std::string reviews;       // 12-column review log
  std::string complexity;    // word,complexity
  std::string concreteness;  // Word,Conc.M,Percent_known
  std::string subtlex;       // Word,FREQcount
  std::string ground_truth;  // model JSON
};

SynthFiles synth_file_paths(const std::string& dir);

// Writes the review log, the three lexicons and the ground-truth model.
SynthFiles write_synth_files(const SynthDataset& data, const std::string& dir);

std::vector<LexiconSource> synth_lexicon_sources(const SynthFiles& files);

}  // namespace fcurve
