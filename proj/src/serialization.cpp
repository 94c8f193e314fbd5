#include "fcurve/serialization.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "fcurve/errors.hpp"

namespace fcurve {
namespace {

json clip_to_json(const Clip& c) {
  return {{"h_min", c.h_min}, {"h_max", c.h_max}, {"p_min", c.p_min}, {"p_max", c.p_max}};
}

Clip clip_from_json(const json& j) {
  Clip c;
  c.h_min = j.at("h_min").get<double>();
  c.h_max = j.at("h_max").get<double>();
  c.p_min = j.at("p_min").get<double>();
  c.p_max = j.at("p_max").get<double>();
  return c;
}

json network_to_json(const NeuralWeights& net) {
  json w1 = json::array();
  for (std::size_t i = 0; i < net.inputs; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < net.hidden; ++j) row.push_back(net.w1_at(i, j));
    w1.push_back(std::move(row));
  }
  json out = {{"inputs", net.inputs}, {"hidden", net.hidden}, {"bias", net.has_bias},
              {"w1", std::move(w1)},  {"w2", net.w2}};
  if (net.has_bias) {
    out["b1"] = net.b1;
    out["b2"] = net.b2;
  }
  return out;
}

NeuralWeights network_from_json(const json& j) {
  auto net = NeuralWeights::zeros(j.at("inputs").get<std::size_t>(),
                                  j.at("hidden").get<std::size_t>(), j.at("bias").get<bool>());
  const auto& w1 = j.at("w1");
  if (!w1.is_array() || w1.size() != net.inputs) {
    throw StructuralError("model document: w1 must have one row per input");
  }
  for (std::size_t i = 0; i < net.inputs; ++i) {
    const auto& row = w1[i];
    if (!row.is_array() || row.size() != net.hidden) {
      throw StructuralError("model document: w1 row " + std::to_string(i) + " has wrong width");
    }
    for (std::size_t k = 0; k < net.hidden; ++k) net.w1_at(i, k) = row[k].get<double>();
  }
  net.w2 = j.at("w2").get<std::vector<double>>();
  if (net.has_bias) {
    net.b1 = j.at("b1").get<std::vector<double>>();
    net.b2 = j.at("b2").get<double>();
  }
  return net;
}

}  // namespace

json to_json(const Hyperparameters& h) {
  return {{"learning_rate", h.learning_rate},
          {"alpha", h.alpha},
          {"lambda", h.lambda},
          {"epochs", h.epochs},
          {"minibatch_size", h.minibatch_size},
          {"seed", h.seed},
          {"hidden_dim", h.hidden_dim},
          {"neural_bias", h.neural_bias},
          {"optimizer", std::string(to_string(h.optimizer))}};
}

Hyperparameters hyperparameters_from_json(const json& j, Hyperparameters h) {
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.alpha = j.value("alpha", h.alpha);
  h.lambda = j.value("lambda", h.lambda);
  h.epochs = j.value("epochs", h.epochs);
  h.minibatch_size = j.value("minibatch_size", h.minibatch_size);
  h.seed = j.value("seed", h.seed);
  h.hidden_dim = j.value("hidden_dim", h.hidden_dim);
  h.neural_bias = j.value("neural_bias", h.neural_bias);
  if (j.contains("optimizer")) h.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  return h;
}

json model_to_json(const ModelState& s) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["kind"] = std::string(to_string(s.kind));
  doc["clip"] = clip_to_json(s.clip);
  doc["hyperparameters"] = to_json(s.hyper);
  doc["feature_flags"] = {{"lexeme_tags", s.flags.lexeme_tags},
                          {"interaction", s.flags.interaction}};
  doc["dense_features"] = s.dense_order;
  if (is_neural(s.kind)) {
    doc["network"] = network_to_json(s.params.net);
  } else {
    json theta = json::object();
    for (const auto& [key, w] : s.params.theta) theta[key] = w;
    doc["theta"] = std::move(theta);
  }
  json features = json::array();
  json means = json::object();
  for (std::size_t i = 0; i < kNumDense; ++i) {
    const auto& r = s.stats.ranges[i];
    const std::string name(kDenseFeatureNames[i]);
    features.push_back({{"name", name}, {"min", r.min}, {"max", r.max}, {"mean", r.mean}});
    means[name] = r.mean;
  }
  doc["normalization"] = {{"features", std::move(features)},
                          {"complexity_mean", s.stats.complexity_mean}};
  doc["imputation_means"] = std::move(means);
  doc["users"] = s.users.users();
  return doc;
}

ModelState model_from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw StructuralError("model document: unsupported format_version");
    }
    ModelState s;
    s.kind = model_kind_from_string(doc.at("kind").get<std::string>());
    s.clip = clip_from_json(doc.at("clip"));
    s.hyper = hyperparameters_from_json(doc.at("hyperparameters"), default_hyperparameters(s.kind));
    const auto& flags = doc.at("feature_flags");
    s.flags.lexeme_tags = flags.at("lexeme_tags").get<bool>();
    s.flags.interaction = flags.at("interaction").get<bool>();
    s.dense_order = doc.at("dense_features").get<std::vector<std::string>>();
    if (is_neural(s.kind)) {
      s.params.net = network_from_json(doc.at("network"));
    } else {
      for (const auto& [key, w] : doc.at("theta").items()) s.params.theta[key] = w.get<double>();
    }
    const auto& norm = doc.at("normalization");
    const auto& features = norm.at("features");
    if (!features.is_array() || features.size() != kNumDense) {
      throw StructuralError("model document: normalization must list " +
                            std::to_string(kNumDense) + " features");
    }
    for (std::size_t i = 0; i < kNumDense; ++i) {
      const auto& f = features[i];
      if (f.at("name").get<std::string>() != kDenseFeatureNames[i]) {
        throw StructuralError("model document: normalization feature " + std::to_string(i) +
                              " is '" + f.at("name").get<std::string>() + "', expected '" +
                              std::string(kDenseFeatureNames[i]) + "'");
      }
      s.stats.ranges[i] = {f.at("min").get<double>(), f.at("max").get<double>(),
                           f.at("mean").get<double>()};
    }
    s.stats.complexity_mean = norm.at("complexity_mean").get<double>();
    s.users = UserIndex(doc.at("users").get<std::vector<std::string>>());
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw StructuralError(std::string("model document: ") + e.what());
  } catch (const ConfigError& e) {
    throw StructuralError(std::string("model document: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelState& state) {
  write_file_atomic(path, model_to_json(state).dump(2) + "\n");
}

ModelState load_model(const std::string& path) {
  const auto text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw StructuralError("model file " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

json to_json(const ImputationCounts& counts) {
  json misses = json::object();
  for (std::size_t i = 0; i < kNumDense; ++i) misses[std::string(kDenseFeatureNames[i])] = counts.misses[i];
  return {{"events", counts.events}, {"misses", std::move(misses)}};
}

json to_json(const EvalReport& r) {
  return {{"kind", std::string(to_string(r.kind))},
          {"num_events", r.num_events},
          {"mae", r.mae},
          {"mean_p_hat", r.mean_p_hat},
          {"mean_observed", r.mean_observed},
          {"imputation_counts", to_json(r.imputation)}};
}

json to_json(const EpochLog& log) {
  return {{"epoch", log.epoch},       {"p_term", log.p_term}, {"h_term", log.h_term},
          {"reg_term", log.reg_term}, {"total", log.total},   {"wall_seconds", log.wall_seconds}};
}

json to_json(const HiddenWeightExport& e) {
  return {{"rows", e.row_labels},
          {"columns", e.column_labels},
          {"matrix", e.matrix},
          {"row_means", e.row_means}};
}

json to_json(const GradientCheckReport& r) {
  return {{"kind", std::string(to_string(r.kind))},
          {"trials", r.trials},
          {"resampled", r.resampled},
          {"max_relative_error", r.max_relative_error},
          {"tolerance", kGradientCheckTolerance},
          {"passed", r.passed}};
}

json ladder_to_json(std::span<const LadderRow> rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json entry = {{"kind", std::string(to_string(row.kind))},
                  {"status", row.ok ? "ok" : "failed"}};
    if (row.ok) {
      entry["train_events"] = row.train_events;
      entry["train_mae"] = row.train_mae;
      entry["test"] = to_json(row.test);
    } else {
      entry["error"] = row.error;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

json ladder_metadata_to_json(std::span<const LadderRow> rows) {
  json out = json::array();
  for (const auto& row : rows) {
    out.push_back({{"kind", std::string(to_string(row.kind))},
                   {"train_seconds", row.train_seconds},
                   {"eval_seconds", row.test.runtime_seconds}});
  }
  return out;
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path temp = target;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + temp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("failed writing " + temp.string());
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) throw InputError("cannot move " + temp.string() + " to " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fcurve
