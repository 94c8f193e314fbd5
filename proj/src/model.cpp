#include "fcurve/model.hpp"

#include <cmath>
#include <stdexcept>

#include "fcurve/errors.hpp"

namespace fcurve {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::pimsleur: return "pimsleur";
    case ModelKind::leitner: return "leitner";
    case ModelKind::linreg: return "linreg";
    case ModelKind::hlr: return "hlr";
    case ModelKind::hlr_lex: return "hlr_lex";
    case ModelKind::hlr_plus: return "hlr_plus";
    case ModelKind::c_hlr_plus: return "c_hlr_plus";
    case ModelKind::n_hlr_plus: return "n_hlr_plus";
    case ModelKind::cn_hlr_plus: return "cn_hlr_plus";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view name) {
  for (ModelKind k : kAllModelKinds) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(Optimizer opt) { return opt == Optimizer::sgd ? "sgd" : "adaptive"; }

Optimizer optimizer_from_string(std::string_view name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adaptive") return Optimizer::adaptive;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

FeatureFlags default_feature_flags(ModelKind kind) {
  FeatureFlags flags;
  flags.lexeme_tags = kind == ModelKind::hlr_lex;
  flags.interaction = !is_neural(kind) && !is_schedule(kind);
  return flags;
}

void validate(const Clip& clip) {
  if (!(clip.h_min > 0 && clip.h_min < clip.h_max)) {
    throw ConfigError("clip requires 0 < h_min < h_max");
  }
  if (!(clip.p_min > 0 && clip.p_min < clip.p_max && clip.p_max < 1)) {
    throw ConfigError("clip requires 0 < p_min < p_max < 1");
  }
}

Hyperparameters default_hyperparameters(ModelKind kind) {
  Hyperparameters h;
  if (is_neural(kind)) {
    h.epochs = 200;
    h.minibatch_size = 1024;
  }
  return h;
}

void validate(const Hyperparameters& h) {
  if (!(h.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(h.alpha >= 0)) throw ConfigError("alpha must be non-negative");
  if (!(h.lambda >= 0)) throw ConfigError("lambda must be non-negative");
  if (h.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (h.minibatch_size < 1) throw ConfigError("minibatch size must be at least 1");
  if (h.hidden_dim < 1) throw ConfigError("hidden dim must be at least 1");
  if (h.workers < 1) throw ConfigError("workers must be at least 1");
}

NeuralWeights NeuralWeights::zeros(std::size_t inputs, std::size_t hidden, bool bias) {
  NeuralWeights net;
  net.inputs = inputs;
  net.hidden = hidden;
  net.has_bias = bias;
  net.w1.assign(inputs * hidden, 0.0);
  net.w2.assign(hidden, 0.0);
  if (bias) net.b1.assign(hidden, 0.0);
  return net;
}

std::vector<std::string> canonical_dense_order() {
  return {kDenseFeatureNames.begin(), kDenseFeatureNames.end()};
}

void validate(const ModelState& state) {
  if (state.dense_order != canonical_dense_order()) {
    throw StructuralError("model dense feature order does not match the extractor's order");
  }
  validate(state.clip);
  const auto& net = state.params.net;
  if (is_neural(state.kind)) {
    if (!state.params.theta.empty()) throw StructuralError("neural model carries linear weights");
    if (net.inputs != kNumDense) {
      throw StructuralError("neural model expects " + std::to_string(net.inputs) +
                            " inputs, extractor provides " + std::to_string(kNumDense));
    }
    if (net.w1.size() != net.inputs * net.hidden || net.w2.size() != net.hidden ||
        (net.has_bias ? net.b1.size() != net.hidden : !net.b1.empty())) {
      throw StructuralError("neural weight shapes are inconsistent");
    }
  } else if (!net.empty()) {
    throw StructuralError("non-neural model carries network weights");
  }
}

double recall_probability(double h_hat, double delta_days, double multiplier, const Clip& clip) {
  if (!(h_hat > 0)) throw std::domain_error("recall_probability: half-life must be positive");
  if (delta_days == 0.0) return 1.0;
  return clip.probability(std::exp2(-delta_days * multiplier / h_hat));
}

double observed_half_life(double observed_recall, double delta_days, const Clip& clip) {
  const double p = clip.probability(observed_recall);
  return clip.half_life(-delta_days / std::log2(p));
}

std::vector<LinearTerm> linear_terms(ModelKind kind, const FeatureVector& fv, double delta_days) {
  std::vector<LinearTerm> terms;
  terms.reserve(3 + kNumDense + fv.sparse_tags.size() + 1);
  terms.push_back({kBiasKey, 1.0});
  if (fv.interaction) {
    terms.push_back({kSqrtSeenKey, (*fv.interaction)[0]});
    terms.push_back({kSqrtCorrectKey, (*fv.interaction)[1]});
  }
  if (uses_dense_features(kind)) {
    for (std::size_t i = 0; i < kNumDense; ++i) terms.push_back({kDenseFeatureNames[i], fv.dense[i]});
  }
  for (const auto& tag : fv.sparse_tags) terms.push_back({tag, 1.0});
  if (kind == ModelKind::linreg) terms.push_back({kDeltaKey, delta_days});
  return terms;
}

double dot(const LinearWeights& theta, std::span<const LinearTerm> terms) {
  double sum = 0.0;
  for (const auto& t : terms) {
    const auto it = theta.find(t.key);
    if (it != theta.end()) sum += it->second * t.value;
  }
  return sum;
}

double linear_half_life(const LinearWeights& theta, std::span<const LinearTerm> terms,
                        const Clip& clip) {
  return clip.half_life(std::exp2(dot(theta, terms)));
}

NeuralForward neural_forward(const NeuralWeights& net, std::span<const double> inputs) {
  if (inputs.size() != net.inputs) {
    throw StructuralError("network expects " + std::to_string(net.inputs) + " inputs, got " +
                          std::to_string(inputs.size()));
  }
  NeuralForward f;
  f.pre.assign(net.hidden, 0.0);
  f.hidden.assign(net.hidden, 0.0);
  for (std::size_t j = 0; j < net.hidden; ++j) {
    double z = net.has_bias ? net.b1[j] : 0.0;
    for (std::size_t i = 0; i < net.inputs; ++i) z += inputs[i] * net.w1_at(i, j);
    f.pre[j] = z;
    f.hidden[j] = z > 0.0 ? z : 0.0;
  }
  double raw = net.has_bias ? net.b2 : 0.0;
  for (std::size_t j = 0; j < net.hidden; ++j) raw += f.hidden[j] * net.w2[j];
  f.raw = raw;
  return f;
}

double neural_half_life(const NeuralWeights& net, std::span<const double> inputs, const Clip& clip) {
  return clip.half_life(neural_forward(net, inputs).raw);
}

double pimsleur_half_life(int history_seen, const Clip& clip) {
  return clip.half_life(5.0 * std::pow(5.0, history_seen - 1) / 86400.0);
}

double leitner_half_life(int history_correct, int history_wrong, const Clip& clip) {
  return clip.half_life(std::exp2(static_cast<double>(history_correct - history_wrong)));
}

double linreg_raw(const LinearWeights& theta, std::span<const LinearTerm> terms) {
  double sum = 0.0;
  for (const auto& t : terms) {
    const auto it = theta.find(t.key);
    if (it == theta.end()) continue;
    const double w = t.key == kDeltaKey ? std::min(it->second, 0.0) : it->second;
    sum += w * t.value;
  }
  return sum;
}

double linreg_recall(const LinearWeights& theta, std::span<const LinearTerm> terms) {
  return std::clamp(linreg_raw(theta, terms), 0.0, 1.0);
}

double complexity_multiplier(ModelKind kind, const FeatureVector& fv) {
  return uses_complexity_multiplier(kind) ? fv.complexity_raw : 1.0;
}

Prediction predict(const ModelState& state, const FeatureVector& fv, double delta_days) {
  const Clip& clip = state.clip;
  Prediction out;
  switch (state.kind) {
    case ModelKind::pimsleur:
      out.h_hat = pimsleur_half_life(fv.history_seen, clip);
      break;
    case ModelKind::leitner:
      out.h_hat = leitner_half_life(fv.history_correct, fv.history_seen - fv.history_correct, clip);
      break;
    case ModelKind::linreg: {
      const auto terms = linear_terms(state.kind, fv, delta_days);
      out.p_hat = linreg_recall(state.params.theta, terms);
      // No half-life construct; report the one implied by p_hat.
      out.h_hat = observed_half_life(out.p_hat, delta_days, clip);
      return out;
    }
    case ModelKind::hlr:
    case ModelKind::hlr_lex:
    case ModelKind::hlr_plus:
    case ModelKind::c_hlr_plus: {
      const auto terms = linear_terms(state.kind, fv, delta_days);
      out.h_hat = linear_half_life(state.params.theta, terms, clip);
      break;
    }
    case ModelKind::n_hlr_plus:
    case ModelKind::cn_hlr_plus:
      out.h_hat = neural_half_life(state.params.net, fv.dense, clip);
      break;
  }
  out.p_hat = recall_probability(out.h_hat, delta_days, complexity_multiplier(state.kind, fv), clip);
  return out;
}

}  // namespace fcurve
