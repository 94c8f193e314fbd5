#include "fcurve/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fcurve/errors.hpp"
#include "fcurve/evaluation.hpp"
#include "fcurve/rng.hpp"
#include "fcurve/serialization.hpp"
#include "fcurve/synth.hpp"
#include "fcurve/training.hpp"

namespace fcurve {

namespace fs = std::filesystem;

Hyperparameters RunConfig::hyperparameters(ModelKind kind) const {
  Hyperparameters h = default_hyperparameters(kind);
  if (hyper.learning_rate) h.learning_rate = *hyper.learning_rate;
  if (hyper.alpha) h.alpha = *hyper.alpha;
  if (hyper.lambda) h.lambda = *hyper.lambda;
  if (hyper.epochs) h.epochs = *hyper.epochs;
  if (hyper.minibatch_size) h.minibatch_size = *hyper.minibatch_size;
  if (hyper.hidden_dim) h.hidden_dim = *hyper.hidden_dim;
  if (hyper.neural_bias) h.neural_bias = *hyper.neural_bias;
  if (hyper.optimizer) h.optimizer = *hyper.optimizer;
  h.seed = derive_seed(seed, "train");
  h.workers = workers;
  return h;
}

FeatureFlags RunConfig::feature_flags(ModelKind kind) const {
  FeatureFlags f = default_feature_flags(kind);
  // Neural inputs are the dense features only.
  if (is_linear(kind)) {
    if (lexeme_tags) f.lexeme_tags = *lexeme_tags;
    if (interaction) f.interaction = *interaction;
  }
  return f;
}

SplitSpec RunConfig::split_spec() const {
  SplitSpec s = split;
  s.seed = derive_seed(seed, "split");
  return s;
}

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  RunConfig c;
  try {
    c.dataset = resolve(base, j.value("dataset", std::string()));
    c.language = j.value("language", c.language);
    if (j.contains("lexicons")) {
      for (const auto& entry : j.at("lexicons")) {
        LexiconSource src;
        src.path = resolve(base, entry.at("path").get<std::string>());
        src.kind = lexicon_kind_from_string(entry.at("kind").get<std::string>());
        if (entry.contains("columns")) {
          const auto& cols = entry.at("columns");
          src.columns.word = cols.value("word", std::string());
          src.columns.value = cols.value("value", std::string());
          src.columns.value2 = cols.value("value2", std::string());
        }
        c.lexicons.push_back(std::move(src));
      }
    }
    if (j.contains("model")) c.model = model_kind_from_string(j.at("model").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.limit = j.value("limit", c.limit);
    c.out_dir = resolve(base, j.value("out", c.out_dir));
    c.workers = j.value("workers", c.workers);
    if (j.contains("split")) c.split.mode = split_mode_from_string(j.at("split").get<std::string>());
    c.split.train_fraction = j.value("train_fraction", c.split.train_fraction);
    read_optional(j, "epochs", c.hyper.epochs);
    read_optional(j, "lr", c.hyper.learning_rate);
    read_optional(j, "alpha", c.hyper.alpha);
    read_optional(j, "lambda", c.hyper.lambda);
    read_optional(j, "hidden_dim", c.hyper.hidden_dim);
    read_optional(j, "minibatch_size", c.hyper.minibatch_size);
    read_optional(j, "neural_bias", c.hyper.neural_bias);
    if (j.contains("optimizer")) {
      c.hyper.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    }
    read_optional(j, "lexeme_tags", c.lexeme_tags);
    read_optional(j, "interaction", c.interaction);
    if (j.contains("clip")) {
      const auto& cl = j.at("clip");
      c.clip.h_min = cl.value("h_min", c.clip.h_min);
      c.clip.h_max = cl.value("h_max", c.clip.h_max);
      c.clip.p_min = cl.value("p_min", c.clip.p_min);
      c.clip.p_max = cl.value("p_max", c.clip.p_max);
    }
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return c;
}

void validate(const RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("no dataset given (--dataset or config 'dataset')");
  if (!fs::exists(c.dataset)) throw InputError("dataset not found: " + c.dataset);
  for (const auto& lex : c.lexicons) {
    if (!fs::exists(lex.path)) throw InputError("lexicon not found: " + lex.path);
  }
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  validate(c.clip);
}

namespace {

struct LoadedData {
  ParsedLog log;
  LexiconBundle lexicons;
  Split split;
};

LoadedData load_data(const RunConfig& config, std::ostream& err) {
  validate(config);
  LoadedData d;
  std::vector<std::string> warnings;
  d.lexicons = LexiconBundle::load(config.lexicons, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  d.log = load_review_log(config.dataset, config.language, config.limit);
  if (d.log.stats.rows_malformed > 0) {
    err << "warning: skipped " << d.log.stats.rows_malformed << " malformed rows\n";
  }
  d.split = split_train_test(d.log.events, config.split_spec());
  return d;
}

json ingest_json(const IngestStats& s) {
  return {{"rows_read", s.rows_read},
          {"rows_malformed", s.rows_malformed},
          {"rows_filtered_out", s.rows_filtered_out},
          {"events", s.events}};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string out_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.out_dir) / name).string();
}

}  // namespace

int cmd_ingest(const RunConfig& config, const std::string& output_path, std::ostream& out,
               std::ostream& err) {
  return run_guarded(err, [&] {
    validate(config);
    std::ifstream in(config.dataset);
    if (!in) throw InputError("cannot open dataset: " + config.dataset);
    ReviewLogReader reader(in, config.language);
    const fs::path target(output_path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path temp = target;
    temp += ".tmp";
    {
      std::ofstream sink(temp, std::ios::trunc);
      if (!sink) throw InputError("cannot write " + temp.string());
      write_review_log_header(sink);
      std::size_t kept = 0;
      while (config.limit == 0 || kept < config.limit) {
        auto ev = reader.next();
        if (!ev) break;
        write_review_log_row(sink, *ev, config.language);
        ++kept;
      }
      if (kept == 0) {
        sink.close();
        fs::remove(temp);
        throw NoDataError("no events for learning language '" + config.language + "' in " +
                          config.dataset);
      }
    }
    fs::rename(temp, target);
    out << ingest_json(reader.stats()).dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    auto data = load_data(config, err);
    const ModelKind kind = config.model;
    const auto hyper = config.hyperparameters(kind);

    const auto start = std::chrono::steady_clock::now();
    std::string log_lines;
    auto result = sgd_train(data.split.train, kind, data.lexicons, hyper,
                            config.feature_flags(kind), config.clip, [&](const EpochLog& log) {
                              log_lines += to_json(log).dump() + "\n";
                            });
    const double train_seconds = seconds_since(start);

    const auto train_report = evaluate(result.state, data.split.train, data.lexicons, config.workers);
    const auto test_report = evaluate(result.state, data.split.test, data.lexicons, config.workers);

    save_model(out_path(config, "model.json"), result.state);
    write_file_atomic(out_path(config, "train_log.jsonl"), log_lines);
    json summary = {{"kind", std::string(to_string(kind))},
                    {"ingest", ingest_json(data.log.stats)},
                    {"train_events", data.split.train.size()},
                    {"test_events", data.split.test.size()},
                    {"train", to_json(train_report)},
                    {"test", to_json(test_report)},
                    {"metadata",
                     {{"train_seconds", train_seconds},
                      {"eval_seconds", train_report.runtime_seconds + test_report.runtime_seconds}}}};
    write_file_atomic(out_path(config, "train_summary.json"), summary.dump(2) + "\n");

    out << "model: " << to_string(kind) << '\n'
        << "train events: " << data.split.train.size() << '\n'
        << "test events: " << data.split.test.size() << '\n'
        << "train MAE: " << train_report.mae << '\n'
        << "test MAE: " << test_report.mae << '\n'
        << "wrote " << out_path(config, "model.json") << '\n';
    return kExitOk;
  });
}

int cmd_evaluate(const RunConfig& config, const std::string& model_path, bool whole_dataset,
                 std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const auto model = load_model(model_path);
    auto data = load_data(config, err);
    const auto& events = whole_dataset ? data.log.events : data.split.test;
    const auto report = evaluate(model, events, data.lexicons, config.workers);
    out << to_json(report).dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_ladder(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    auto data = load_data(config, err);
    std::vector<LadderRow> rows;
    for (ModelKind kind : kAllModelKinds) {
      LadderRow row;
      row.kind = kind;
      try {
        const auto start = std::chrono::steady_clock::now();
        auto result = sgd_train(data.split.train, kind, data.lexicons, config.hyperparameters(kind),
                                config.feature_flags(kind), config.clip);
        row.train_seconds = seconds_since(start);
        row.train_events = result.train_events;
        row.train_mae = evaluate(result.state, data.split.train, data.lexicons, config.workers).mae;
        row.test = evaluate(result.state, data.split.test, data.lexicons, config.workers);
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        err << "error: " << to_string(kind) << ": " << e.what() << '\n';
      }
      rows.push_back(std::move(row));
    }
    const auto table = format_ladder_table(rows);
    write_file_atomic(out_path(config, "ladder.json"), ladder_to_json(rows).dump(2) + "\n");
    write_file_atomic(out_path(config, "ladder.txt"), table);
    write_file_atomic(out_path(config, "ladder.meta.json"),
                      ladder_metadata_to_json(rows).dump(2) + "\n");
    out << table;
    const bool all_ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok; });
    return all_ok ? kExitOk : kExitFailure;
  });
}

int cmd_inspect(const std::string& model_path, std::size_t top_k, std::ostream& out,
                std::ostream& err) {
  return run_guarded(err, [&] {
    const auto model = load_model(model_path);
    json doc = {{"kind", std::string(to_string(model.kind))}};
    if (is_neural(model.kind)) {
      doc["hidden_weights"] = to_json(export_hidden_weights(model));
    } else {
      std::vector<std::pair<std::string, double>> weights(model.params.theta.begin(),
                                                          model.params.theta.end());
      std::stable_sort(weights.begin(), weights.end(), [](const auto& a, const auto& b) {
        return std::abs(a.second) > std::abs(b.second);
      });
      if (weights.size() > top_k) weights.resize(top_k);
      json list = json::array();
      for (const auto& [key, w] : weights) list.push_back({{"feature", key}, {"weight", w}});
      doc["total_weights"] = model.params.theta.size();
      doc["top_weights"] = std::move(list);
    }
    out << doc.dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_gradcheck(ModelKind kind, int trials, std::uint64_t seed, std::ostream& out,
                  std::ostream& err) {
  return run_guarded(err, [&] {
    const auto report = gradient_check(kind, trials, seed);
    out << to_json(report).dump(2) << '\n';
    return report.passed ? kExitOk : kExitFailure;
  });
}

int cmd_synth(const SynthCommand& command, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    SynthSpec spec;
    spec.truth_kind = command.truth_kind;
    spec.num_users = command.num_users;
    spec.num_words = command.num_words;
    spec.events_per_pair = command.events_per_pair;
    spec.noise = command.binomial ? NoiseModel::binomial : NoiseModel::deterministic_p;
    spec.session_seen_min = command.session_seen_min;
    spec.session_seen_max = command.session_seen_max;
    spec.seed = command.seed;
    const auto data = generate(spec);
    const auto files = write_synth_files(data, command.out_dir);

    json config = {{"dataset", "reviews.csv"},
                   {"language", "en"},
                   {"lexicons",
                    {{{"kind", "complexity"}, {"path", "complexity.csv"}},
                     {{"kind", "concreteness_norms"}, {"path", "concreteness.csv"}},
                     {{"kind", "subtlex"}, {"path", "subtlex.csv"}}}},
                   {"model", std::string(to_string(command.truth_kind))},
                   {"seed", command.seed},
                   {"out", "out"}};
    write_file_atomic((fs::path(command.out_dir) / "config.json").string(), config.dump(2) + "\n");
    out << "wrote " << data.events.size() << " events to " << files.reviews << '\n'
        << "lexicons: " << files.complexity << ", " << files.concreteness << ", " << files.subtlex
        << '\n'
        << "ground truth: " << files.ground_truth << '\n';
    return kExitOk;
  });
}

}  // namespace fcurve
