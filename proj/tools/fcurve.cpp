// fcurve: train and compare forgetting-curve models on spaced-repetition logs.
//
//   fcurve synth   --out DIR [--truth KIND] [--seed N]
//   fcurve train   --config DIR/config.json [--model KIND] [--epochs N] ...
//   fcurve evaluate --config ... --model-file out/model.json
//   fcurve ladder  --config ...
//   fcurve inspect out/model.json [--top K]
//   fcurve ingest  --dataset dump.csv --output english.csv
//   fcurve gradcheck --model KIND [--trials N]

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fcurve/cli.hpp"
#include "fcurve/errors.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::string dataset;
  std::string language;
  std::string model;
  std::string out;
  std::string split;
  std::string optimizer;
  std::uint64_t seed = 0;
  std::size_t limit = 0;
  int epochs = 0;
  double lr = 0;
  double alpha = 0;
  double lambda = 0;
  int hidden_dim = 0;
  int minibatch = 0;
  int workers = 1;
  double train_fraction = 0.9;
  bool lexeme_tags = false;

  std::vector<CLI::Option*> options;
};

// Flags shared by every data-consuming subcommand.
void add_run_flags(CLI::App& app, RunFlags& f) {
  f.options = {
      app.add_option("--config", f.config, "JSON run config; flags override its values"),
      app.add_option("--dataset", f.dataset, "Review log (12-column CSV)"),
      app.add_option("--language", f.language, "Learning language to keep (default en)"),
      app.add_option("--model", f.model, "Model kind"),
      app.add_option("--seed", f.seed, "Top-level seed"),
      app.add_option("--limit", f.limit, "Keep only the first N events (0 = all)"),
      app.add_option("--out", f.out, "Output directory"),
      app.add_option("--split", f.split, "random or chronological")
          ->check(CLI::IsMember({"random", "chronological"})),
      app.add_option("--train-fraction", f.train_fraction, "Training share of the split"),
      app.add_option("--epochs", f.epochs, "Training epochs"),
      app.add_option("--lr", f.lr, "Learning rate"),
      app.add_option("--alpha", f.alpha, "Weight of the half-life loss term"),
      app.add_option("--lambda", f.lambda, "L2 weight"),
      app.add_option("--hidden-dim", f.hidden_dim, "Hidden units of the neural kinds"),
      app.add_option("--minibatch", f.minibatch, "Minibatch size"),
      app.add_option("--optimizer", f.optimizer, "sgd or adaptive")
          ->check(CLI::IsMember({"sgd", "adaptive"})),
      app.add_option("--workers", f.workers, "Worker threads"),
      app.add_flag("--lexeme-tags", f.lexeme_tags, "Attach sparse lexeme-tag features"),
  };
}

bool given(const CLI::App& app, const char* name) { return app.get_option(name)->count() > 0; }

fcurve::RunConfig build_config(const CLI::App& app, const RunFlags& f) {
  using namespace fcurve;
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (given(app, "--dataset")) c.dataset = f.dataset;
  if (given(app, "--language")) c.language = f.language;
  if (given(app, "--model")) c.model = model_kind_from_string(f.model);
  if (given(app, "--seed")) c.seed = f.seed;
  if (given(app, "--limit")) c.limit = f.limit;
  if (given(app, "--out")) c.out_dir = f.out;
  if (given(app, "--split")) c.split.mode = split_mode_from_string(f.split);
  if (given(app, "--train-fraction")) c.split.train_fraction = f.train_fraction;
  if (given(app, "--epochs")) c.hyper.epochs = f.epochs;
  if (given(app, "--lr")) c.hyper.learning_rate = f.lr;
  if (given(app, "--alpha")) c.hyper.alpha = f.alpha;
  if (given(app, "--lambda")) c.hyper.lambda = f.lambda;
  if (given(app, "--hidden-dim")) c.hyper.hidden_dim = f.hidden_dim;
  if (given(app, "--minibatch")) c.hyper.minibatch_size = f.minibatch;
  if (given(app, "--optimizer")) c.hyper.optimizer = optimizer_from_string(f.optimizer);
  if (given(app, "--workers")) c.workers = f.workers;
  if (given(app, "--lexeme-tags")) c.lexeme_tags = f.lexeme_tags;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fcurve;
  CLI::App app{"Forgetting-curve models for spaced-repetition logs"};
  app.require_subcommand(1);

  RunFlags train_flags, eval_flags, ladder_flags, ingest_flags;
  auto* train = app.add_subcommand("train", "Fit one model kind and report train/test MAE");
  add_run_flags(*train, train_flags);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a saved model on the test split");
  add_run_flags(*evaluate, eval_flags);
  std::string eval_model;
  bool eval_all = false;
  evaluate->add_option("--model-file", eval_model, "Model JSON")->required();
  evaluate->add_flag("--all", eval_all, "Evaluate on every event instead of the test split");

  auto* ladder = app.add_subcommand("ladder", "Train and evaluate every model kind on one split");
  add_run_flags(*ladder, ladder_flags);

  auto* ingest = app.add_subcommand("ingest", "Filter a review log by language and re-emit it");
  add_run_flags(*ingest, ingest_flags);
  std::string ingest_output;
  ingest->add_option("--output", ingest_output, "Filtered CSV path")->required();

  auto* inspect = app.add_subcommand("inspect", "Summarize a saved model's weights");
  std::string inspect_model;
  std::size_t top_k = 20;
  inspect->add_option("model", inspect_model, "Model JSON")->required();
  inspect->add_option("--top", top_k, "Number of linear weights to list");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic log from a known model");
  SynthCommand synth_cmd;
  std::string truth = "hlr";
  bool deterministic = false;
  synth->add_option("--out", synth_cmd.out_dir, "Output directory")->required();
  synth->add_option("--truth", truth, "Ground-truth model kind");
  synth->add_option("--users", synth_cmd.num_users, "Number of learners");
  synth->add_option("--words", synth_cmd.num_words, "Number of words");
  synth->add_option("--events-per-pair", synth_cmd.events_per_pair, "Events per learner-word pair");
  synth->add_option("--session-seen-min", synth_cmd.session_seen_min, "Smallest session size");
  synth->add_option("--session-seen-max", synth_cmd.session_seen_max, "Largest session size");
  synth->add_flag("--deterministic", deterministic, "Observed recall equals the true p");
  synth->add_option("--seed", synth_cmd.seed, "Seed");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the gradients");
  std::string check_kind = "hlr";
  int trials = 100;
  std::uint64_t check_seed = 0;
  gradcheck->add_option("--model", check_kind, "Trainable model kind");
  gradcheck->add_option("--trials", trials, "Random trials");
  gradcheck->add_option("--seed", check_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  auto with_config = [&](const CLI::App& sub, const RunFlags& flags, auto&& command) {
    RunConfig config;
    const int rc = run_guarded(std::cerr, [&] {
      config = build_config(sub, flags);
      return kExitOk;
    });
    return rc != kExitOk ? rc : command(config);
  };

  if (*train) {
    return with_config(*train, train_flags,
                       [&](const RunConfig& c) { return cmd_train(c, std::cout, std::cerr); });
  }
  if (*evaluate) {
    return with_config(*evaluate, eval_flags, [&](const RunConfig& c) {
      return cmd_evaluate(c, eval_model, eval_all, std::cout, std::cerr);
    });
  }
  if (*ladder) {
    return with_config(*ladder, ladder_flags,
                       [&](const RunConfig& c) { return cmd_ladder(c, std::cout, std::cerr); });
  }
  if (*ingest) {
    return with_config(*ingest, ingest_flags, [&](const RunConfig& c) {
      return cmd_ingest(c, ingest_output, std::cout, std::cerr);
    });
  }
  if (*inspect) return cmd_inspect(inspect_model, top_k, std::cout, std::cerr);
  if (*synth) {
    return run_guarded(std::cerr, [&] {
      synth_cmd.truth_kind = model_kind_from_string(truth);
      synth_cmd.binomial = !deterministic;
      return cmd_synth(synth_cmd, std::cout, std::cerr);
    });
  }
  if (*gradcheck) {
    return run_guarded(std::cerr, [&] {
      return cmd_gradcheck(model_kind_from_string(check_kind), trials, check_seed, std::cout,
                           std::cerr);
    });
  }
  return kExitBadInput;
}
