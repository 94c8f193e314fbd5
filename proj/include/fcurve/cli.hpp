#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fcurve/dataset.hpp"
#include "fcurve/features.hpp"
#include "fcurve/model.hpp"

namespace fcurve {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadInput = 2;

// Partial hyperparameters; unset fields fall back to the kind's defaults.
struct HyperOverrides {
  std::optional<double> learning_rate;
  std::optional<double> alpha;
  std::optional<double> lambda;
  std::optional<int> epochs;
  std::optional<int> minibatch_size;
  std::optional<int> hidden_dim;
  std::optional<bool> neural_bias;
  std::optional<Optimizer> optimizer;
};

struct RunConfig {
  std::string dataset;
  std::string language = "en";
  std::vector<LexiconSource> lexicons;
  ModelKind model = ModelKind::hlr;
  HyperOverrides hyper;
  SplitSpec split;
  std::optional<bool> lexeme_tags;
  std::optional<bool> interaction;
  Clip clip;
  std::string out_dir = "out";
  std::size_t limit = 0;  // 0 = all rows
  std::uint64_t seed = 0;
  int workers = 1;

  // Defaults for `kind`, the overrides on top, and a seed derived from the
  // run seed.
  Hyperparameters hyperparameters(ModelKind kind) const;
  FeatureFlags feature_flags(ModelKind kind) const;
  SplitSpec split_spec() const;  // seed derived from the run seed
};

// Reads a JSON run config. Relative paths inside it resolve against the
// config file's directory. Throws ConfigError.
RunConfig load_run_config(const std::string& path);

// Checks that referenced paths exist. Throws InputError naming the path.
void validate(const RunConfig& config);

// Each command returns an exit code and prints diagnostics to `err`.
int cmd_ingest(const RunConfig& config, const std::string& output_path, std::ostream& out,
               std::ostream& err);
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& config, const std::string& model_path, bool whole_dataset,
                 std::ostream& out, std::ostream& err);
int cmd_ladder(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_inspect(const std::string& model_path, std::size_t top_k, std::ostream& out,
                std::ostream& err);
int cmd_gradcheck(ModelKind kind, int trials, std::uint64_t seed, std::ostream& out,
                  std::ostream& err);

struct SynthCommand {
  std::string out_dir;
  ModelKind truth_kind = ModelKind::hlr;
  int num_users = 100;
  int num_words = 200;
  int events_per_pair = 10;
  bool binomial = true;
  int session_seen_min = 1;
  int session_seen_max = 10;
  std::uint64_t seed = 0;
};

// Writes the synthetic log, lexicons, ground truth and a ready-to-use
// config.json into the output directory.
int cmd_synth(const SynthCommand& command, std::ostream& out, std::ostream& err);

// Runs `body`, mapping library exceptions onto exit codes with a single-line
// diagnostic.
template <typename Body>
int run_guarded(std::ostream& err, Body&& body);

}  // namespace fcurve

#include "fcurve/cli_inl.hpp"
