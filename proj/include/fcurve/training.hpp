#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fcurve/features.hpp"
#include "fcurve/model.hpp"

namespace fcurve {

struct LossBreakdown {
  double p_term = 0.0;
  double h_term = 0.0;    // already alpha-weighted
  double reg_term = 0.0;  // lambda * sum of squared non-bias weights
  double total = 0.0;
};

// Sum of squared trainable weights, bias terms excluded.
double squared_weight_norm(const Parameters& params);

// (p - p_hat)^2 + alpha (h - h_hat)^2 + lambda |w|^2.
LossBreakdown loss(double observed_recall, double p_hat, double observed_h, double h_hat,
                   const Parameters& params, const Hyperparameters& hyper);

// One supervised example: features plus the targets derived from the event.
struct TrainingExample {
  FeatureVector features;
  double delta_days = 0.0;
  double observed_recall = 0.0;
  double observed_h = 1.0;
};

TrainingExample make_example(const ReviewEvent& event, FeatureVector features, const Clip& clip);

// Loss of `state` on one example. Linear regression has no half-life target,
// so its h_term is 0.
LossBreakdown example_loss(const ModelState& state, const TrainingExample& example);

// Exact gradient of example_loss(...).total with respect to the trainable
// parameters. Engaged clips and inactive ReLU units pass no gradient.
Parameters gradient(const ModelState& state, const TrainingExample& example);
Parameters gradient(const ModelState& state, const FeatureVector& fv, const ReviewEvent& event);

// dst += scale * src, over the keys/entries of src.
void add_scaled(Parameters& dst, const Parameters& src, double scale);

struct EpochLog {
  int epoch = 0;
  double p_term = 0.0;
  double h_term = 0.0;
  double reg_term = 0.0;
  double total = 0.0;
  double wall_seconds = 0.0;
};

// Features fitted on a training split.
struct FeaturePipeline {
  FeatureFlags flags;
  UserIndex users;
  NormalizationStats stats;
};

FeaturePipeline fit_feature_pipeline(std::span<const ReviewEvent> train,
                                     const LexiconBundle& lexicons, const FeatureFlags& flags);

struct PreparedData {
  std::vector<TrainingExample> examples;
  ImputationCounts imputation;
};

PreparedData prepare_examples(std::span<const ReviewEvent> events, const LexiconBundle& lexicons,
                              const FeaturePipeline& pipeline, const Clip& clip,
                              int workers = 1);

// Linear kinds start at zero. Neural kinds draw W1 from U[-0.1, 0.1] and
// W2 from U[0, sqrt(6 / hidden)], seeded from hyper.seed; biases start at
// zero.
ModelState initial_state(ModelKind kind, const Hyperparameters& hyper,
                         const FeaturePipeline& pipeline, const Clip& clip = {});

struct TrainResult {
  ModelState state;
  std::vector<EpochLog> log;
  std::size_t train_events = 0;
  ImputationCounts imputation;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Minibatch gradient descent from `initial` over `examples`. Each epoch
// visits the examples in a freshly shuffled order (seeded from
// hyper.seed). Throws DivergenceError naming the epoch if the epoch-mean
// loss is not finite. Results do not depend on hyper.workers.
TrainResult train_model(ModelState initial, std::span<const TrainingExample> examples,
                        const Hyperparameters& hyper, const EpochCallback& on_epoch = {});

// Full pipeline: user index + normalization on `events`, feature extraction,
// initialization and training.
TrainResult sgd_train(std::span<const ReviewEvent> events, ModelKind kind,
                      const LexiconBundle& lexicons, const Hyperparameters& hyper,
                      const Clip& clip = {}, const EpochCallback& on_epoch = {});
TrainResult sgd_train(std::span<const ReviewEvent> events, ModelKind kind,
                      const LexiconBundle& lexicons, const Hyperparameters& hyper,
                      const FeatureFlags& flags, const Clip& clip = {},
                      const EpochCallback& on_epoch = {});

struct GradientCheckReport {
  ModelKind kind = ModelKind::hlr;
  int trials = 0;
  int resampled = 0;  // draws rejected for sitting near a clip or ReLU kink
  double max_relative_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradientCheckTolerance = 1e-4;
inline constexpr double kGradientCheckStep = 1e-5;

// Compares gradient() against central finite differences of
// example_loss().total on random states and examples away from
// nondifferentiable points.
GradientCheckReport gradient_check(ModelKind kind, int num_trials, std::uint64_t seed);

}  // namespace fcurve
