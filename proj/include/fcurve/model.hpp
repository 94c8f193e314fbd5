#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcurve/features.hpp"

namespace fcurve {

enum class ModelKind {
  pimsleur,
  leitner,
  linreg,
  hlr,
  hlr_lex,
  hlr_plus,
  c_hlr_plus,
  n_hlr_plus,
  cn_hlr_plus,
};

// Ladder order, weakest baseline first.
inline constexpr std::array<ModelKind, 9> kAllModelKinds = {
    ModelKind::pimsleur,   ModelKind::leitner,    ModelKind::linreg,
    ModelKind::hlr,        ModelKind::hlr_lex,    ModelKind::hlr_plus,
    ModelKind::c_hlr_plus, ModelKind::n_hlr_plus, ModelKind::cn_hlr_plus};

inline constexpr std::array<ModelKind, 7> kTrainableKinds = {
    ModelKind::linreg,     ModelKind::hlr,        ModelKind::hlr_lex,   ModelKind::hlr_plus,
    ModelKind::c_hlr_plus, ModelKind::n_hlr_plus, ModelKind::cn_hlr_plus};

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);  // throws ConfigError

constexpr bool is_neural(ModelKind k) {
  return k == ModelKind::n_hlr_plus || k == ModelKind::cn_hlr_plus;
}
constexpr bool is_schedule(ModelKind k) {
  return k == ModelKind::pimsleur || k == ModelKind::leitner;
}
constexpr bool is_trainable(ModelKind k) { return !is_schedule(k); }
constexpr bool is_linear(ModelKind k) { return is_trainable(k) && !is_neural(k); }
// Kinds whose recall curve scales the decay by the word's complexity.
constexpr bool uses_complexity_multiplier(ModelKind k) {
  return k == ModelKind::c_hlr_plus || k == ModelKind::cn_hlr_plus;
}
// Linear kinds that see the five dense lexical/user features.
constexpr bool uses_dense_features(ModelKind k) {
  return k == ModelKind::linreg || k == ModelKind::hlr_plus || k == ModelKind::c_hlr_plus;
}

FeatureFlags default_feature_flags(ModelKind kind);

struct Clip {
  double h_min = 15.0 / (24.0 * 60.0);  // 15 minutes, in days
  double h_max = 274.0;
  double p_min = 0.0001;
  double p_max = 0.9999;

  double half_life(double h) const { return h < h_min ? h_min : (h > h_max ? h_max : h); }
  double probability(double p) const { return p < p_min ? p_min : (p > p_max ? p_max : p); }

  bool operator==(const Clip&) const = default;
};

void validate(const Clip& clip);  // throws ConfigError

enum class Optimizer { sgd, adaptive };

std::string_view to_string(Optimizer opt);
Optimizer optimizer_from_string(std::string_view name);

struct Hyperparameters {
  double learning_rate = 0.001;
  double alpha = 0.01;   // weight of the half-life term
  double lambda = 0.1;   // L2 weight
  int epochs = 1;
  int minibatch_size = 1;
  std::uint64_t seed = 0;
  int hidden_dim = 4;
  bool neural_bias = false;
  Optimizer optimizer = Optimizer::sgd;
  int workers = 1;

  bool operator==(const Hyperparameters&) const = default;
};

// Default hyperparameters per family: linear kinds do one online pass, neural kinds
// 200 epochs of 1024-event minibatches.
Hyperparameters default_hyperparameters(ModelKind kind);
void validate(const Hyperparameters& hyper);  // throws ConfigError

// Weight keys for the linear families.
inline constexpr std::string_view kBiasKey = "bias";
inline constexpr std::string_view kSqrtSeenKey = "sqrt_seen";
inline constexpr std::string_view kSqrtCorrectKey = "sqrt_correct";
inline constexpr std::string_view kDeltaKey = "delta";
inline constexpr std::string_view kTagPrefix = "tag:";

using LinearWeights = std::map<std::string, double, std::less<>>;

// Single hidden layer: hidden = max(0, x W1 [+ b1]), out = hidden . W2 [+ b2].
struct NeuralWeights {
  std::size_t inputs = kNumDense;
  std::size_t hidden = 4;
  bool has_bias = false;
  std::vector<double> w1;  // row-major [inputs x hidden]
  std::vector<double> w2;  // [hidden]
  std::vector<double> b1;  // [hidden] when has_bias
  double b2 = 0.0;

  static NeuralWeights zeros(std::size_t inputs, std::size_t hidden, bool bias);

  double& w1_at(std::size_t i, std::size_t j) { return w1[i * hidden + j]; }
  double w1_at(std::size_t i, std::size_t j) const { return w1[i * hidden + j]; }
  bool empty() const { return w1.empty() && w2.empty(); }

  bool operator==(const NeuralWeights&) const = default;
};

// Trainable parameters. Linear kinds fill `theta`, neural kinds fill `net`.
// Gradients use the same shape.
struct Parameters {
  LinearWeights theta;
  NeuralWeights net;

  bool operator==(const Parameters&) const = default;
};

struct ModelState {
  ModelKind kind = ModelKind::hlr;
  Clip clip;
  Hyperparameters hyper;
  FeatureFlags flags;
  Parameters params;
  std::vector<std::string> dense_order;  // must equal kDenseFeatureNames
  NormalizationStats stats;
  UserIndex users;
};

// Checks that the populated parameter group matches the kind and that the
// stored dense order matches this build. Throws StructuralError.
void validate(const ModelState& state);

std::vector<std::string> canonical_dense_order();

struct Prediction {
  double p_hat = 1.0;
  double h_hat = 1.0;
};

// 2^(-delta * multiplier / h_hat), clipped into [p_min, p_max]; exactly 1
// when delta is 0. Throws std::domain_error for h_hat <= 0.
double recall_probability(double h_hat, double delta_days, double complexity_multiplier,
                          const Clip& clip);

// Inverts the recall curve for the observed recall: -delta / log2(p) with p
// clipped first and the result clipped into [h_min, h_max].
double observed_half_life(double observed_recall, double delta_days, const Clip& clip);

struct LinearTerm {
  std::string_view key;
  double value;
};

// Active (key, value) inputs of a linear kind, in a fixed order: bias,
// interaction pair, dense features, lexeme tags, then delta (linreg only).
// Views point into `fv` and static storage.
std::vector<LinearTerm> linear_terms(ModelKind kind, const FeatureVector& fv,
                                     double delta_days);

double dot(const LinearWeights& theta, std::span<const LinearTerm> terms);

// 2^(theta . x) clipped to [h_min, h_max].
double linear_half_life(const LinearWeights& theta, std::span<const LinearTerm> terms,
                        const Clip& clip);

struct NeuralForward {
  std::vector<double> pre;     // x W1 (+ b1)
  std::vector<double> hidden;  // ReLU(pre)
  double raw = 0.0;            // hidden . W2 (+ b2), before clipping
};

NeuralForward neural_forward(const NeuralWeights& net, std::span<const double> inputs);

// Network output taken as the half-life directly, clipped. Throws
// StructuralError if inputs.size() != net.inputs.
double neural_half_life(const NeuralWeights& net, std::span<const double> inputs,
                        const Clip& clip);

// 5 seconds, multiplied by 5 per prior exposure.
double pimsleur_half_life(int history_seen, const Clip& clip);

// 2^(correct - wrong) days.
double leitner_half_life(int history_correct, int history_wrong, const Clip& clip);

// The delta weight is applied as min(theta_delta, 0): elapsed time may
// only lower recall.
double linreg_raw(const LinearWeights& theta, std::span<const LinearTerm> terms);
double linreg_recall(const LinearWeights& theta, std::span<const LinearTerm> terms);

Prediction predict(const ModelState& state, const FeatureVector& fv, double delta_days);

// Complexity multiplier the kind applies: complexity_raw or 1.
double complexity_multiplier(ModelKind kind, const FeatureVector& fv);

}  // namespace fcurve
