#include "fcurve/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

#include "fcurve/errors.hpp"
#include "fcurve/parallel.hpp"
#include "fcurve/rng.hpp"

namespace fcurve {
namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kInitW1 = 0.1;

bool outside(double v, double lo, double hi) { return v < lo || v > hi; }

// Forward and backward through recall_probability and both loss terms, for a
// half-life model whose unclipped output is `raw_h`. d_raw is dL/d(raw_h).
struct CurveGrad {
  double p_hat = 1.0;
  double h_hat = 1.0;
  double p_term = 0.0;
  double h_term = 0.0;
  double d_raw = 0.0;
};

CurveGrad curve_backward(double raw_h, const TrainingExample& ex, double multiplier,
                         const Clip& clip, double alpha) {
  CurveGrad g;
  g.h_hat = clip.half_life(raw_h);
  double dp_dh = 0.0;
  if (ex.delta_days != 0.0) {
    const double p = std::exp2(-ex.delta_days * multiplier / g.h_hat);
    g.p_hat = clip.probability(p);
    if (!outside(p, clip.p_min, clip.p_max)) {
      dp_dh = p * kLn2 * ex.delta_days * multiplier / (g.h_hat * g.h_hat);
    }
  }
  const double p_res = g.p_hat - ex.observed_recall;
  const double h_res = g.h_hat - ex.observed_h;
  g.p_term = p_res * p_res;
  g.h_term = alpha * h_res * h_res;
  const double d_h = 2.0 * p_res * dp_dh + 2.0 * alpha * h_res;
  g.d_raw = outside(raw_h, clip.h_min, clip.h_max) ? 0.0 : d_h;
  return g;
}

// Linear regression on recall directly: p_hat = clamp(raw, 0, 1).
struct LinregGrad {
  double p_hat = 0.0;
  double p_term = 0.0;
  double d_raw = 0.0;
};

LinregGrad linreg_backward(double raw, double observed) {
  LinregGrad g;
  g.p_hat = std::clamp(raw, 0.0, 1.0);
  const double res = g.p_hat - observed;
  g.p_term = res * res;
  g.d_raw = outside(raw, 0.0, 1.0) ? 0.0 : 2.0 * res;
  return g;
}

bool is_bias_key(std::string_view key) { return key == kBiasKey; }

// Neural backward for one example; adds dL/dparams (data part only) into
// `grad`, which must have the network's shape.
CurveGrad neural_accumulate(const ModelState& state, const TrainingExample& ex,
                            NeuralWeights& grad) {
  const auto& net = state.params.net;
  const auto f = neural_forward(net, ex.features.dense);
  const auto cg = curve_backward(f.raw, ex, complexity_multiplier(state.kind, ex.features),
                                 state.clip, state.hyper.alpha);
  if (cg.d_raw == 0.0) return cg;
  const auto& x = ex.features.dense;
  for (std::size_t j = 0; j < net.hidden; ++j) {
    grad.w2[j] += cg.d_raw * f.hidden[j];
    if (f.pre[j] <= 0.0) continue;
    const double d_pre = cg.d_raw * net.w2[j];
    for (std::size_t i = 0; i < net.inputs; ++i) grad.w1[i * net.hidden + j] += d_pre * x[i];
    if (net.has_bias) grad.b1[j] += d_pre;
  }
  if (net.has_bias) grad.b2 += cg.d_raw;
  return cg;
}

void add_neural_regularizer(const NeuralWeights& net, double lambda, NeuralWeights& grad) {
  for (std::size_t k = 0; k < net.w1.size(); ++k) grad.w1[k] += 2.0 * lambda * net.w1[k];
  for (std::size_t k = 0; k < net.w2.size(); ++k) grad.w2[k] += 2.0 * lambda * net.w2[k];
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double squared_weight_norm(const Parameters& params) {
  double sum = 0.0;
  for (const auto& [key, w] : params.theta) {
    if (!is_bias_key(key)) sum += w * w;
  }
  for (double w : params.net.w1) sum += w * w;
  for (double w : params.net.w2) sum += w * w;
  return sum;
}

LossBreakdown loss(double observed_recall, double p_hat, double observed_h, double h_hat,
                   const Parameters& params, const Hyperparameters& hyper) {
  LossBreakdown out;
  out.p_term = (observed_recall - p_hat) * (observed_recall - p_hat);
  out.h_term = hyper.alpha * (observed_h - h_hat) * (observed_h - h_hat);
  out.reg_term = hyper.lambda * squared_weight_norm(params);
  out.total = out.p_term + out.h_term + out.reg_term;
  return out;
}

TrainingExample make_example(const ReviewEvent& event, FeatureVector features, const Clip& clip) {
  TrainingExample ex;
  ex.features = std::move(features);
  ex.delta_days = event.delta_days;
  ex.observed_recall = event.observed_recall;
  ex.observed_h = observed_half_life(event.observed_recall, event.delta_days, clip);
  return ex;
}

LossBreakdown example_loss(const ModelState& state, const TrainingExample& ex) {
  const auto pred = predict(state, ex.features, ex.delta_days);
  auto out = loss(ex.observed_recall, pred.p_hat, ex.observed_h, pred.h_hat, state.params,
                  state.hyper);
  if (state.kind == ModelKind::linreg) {
    out.total -= out.h_term;
    out.h_term = 0.0;
  }
  return out;
}

Parameters gradient(const ModelState& state, const TrainingExample& ex) {
  if (!is_trainable(state.kind)) {
    throw InputError("gradient: kind '" + std::string(to_string(state.kind)) +
                     "' has no trainable parameters");
  }
  const double lambda = state.hyper.lambda;
  Parameters g;
  if (is_neural(state.kind)) {
    const auto& net = state.params.net;
    g.net = NeuralWeights::zeros(net.inputs, net.hidden, net.has_bias);
    neural_accumulate(state, ex, g.net);
    add_neural_regularizer(net, lambda, g.net);
    return g;
  }

  const auto& theta = state.params.theta;
  const auto terms = linear_terms(state.kind, ex.features, ex.delta_days);
  if (state.kind == ModelKind::linreg) {
    const auto lg = linreg_backward(linreg_raw(theta, terms), ex.observed_recall);
    for (const auto& t : terms) {
      double d = lg.d_raw * t.value;
      if (t.key == kDeltaKey) {
        const auto it = theta.find(t.key);
        if (it != theta.end() && it->second > 0.0) d = 0.0;
      }
      g.theta[std::string(t.key)] += d;
    }
  } else {
    const double raw = std::exp2(dot(theta, terms));
    const auto cg = curve_backward(raw, ex, complexity_multiplier(state.kind, ex.features),
                                   state.clip, state.hyper.alpha);
    const double d_dot = cg.d_raw * raw * kLn2;
    for (const auto& t : terms) g.theta[std::string(t.key)] += d_dot * t.value;
  }
  for (const auto& [key, w] : theta) {
    if (!is_bias_key(key)) g.theta[key] += 2.0 * lambda * w;
  }
  return g;
}

Parameters gradient(const ModelState& state, const FeatureVector& fv, const ReviewEvent& event) {
  return gradient(state, make_example(event, fv, state.clip));
}

void add_scaled(Parameters& dst, const Parameters& src, double scale) {
  for (const auto& [key, v] : src.theta) dst.theta[key] += scale * v;
  if (src.net.empty()) return;
  auto& net = dst.net;
  if (net.w1.size() != src.net.w1.size() || net.w2.size() != src.net.w2.size() ||
      net.b1.size() != src.net.b1.size()) {
    throw StructuralError("add_scaled: network shapes differ");
  }
  for (std::size_t k = 0; k < net.w1.size(); ++k) net.w1[k] += scale * src.net.w1[k];
  for (std::size_t k = 0; k < net.w2.size(); ++k) net.w2[k] += scale * src.net.w2[k];
  for (std::size_t k = 0; k < net.b1.size(); ++k) net.b1[k] += scale * src.net.b1[k];
  net.b2 += scale * src.net.b2;
}

FeaturePipeline fit_feature_pipeline(std::span<const ReviewEvent> train,
                                     const LexiconBundle& lexicons, const FeatureFlags& flags) {
  FeaturePipeline p;
  p.flags = flags;
  p.users = build_user_index(train);
  p.stats = fit_normalization(train, lexicons, p.users);
  return p;
}

PreparedData prepare_examples(std::span<const ReviewEvent> events, const LexiconBundle& lexicons,
                              const FeaturePipeline& pipeline, const Clip& clip, int workers) {
  PreparedData out;
  out.examples.resize(events.size());
  parallel_chunks(num_chunks(events.size()), workers, [&](std::size_t c) {
    const std::size_t end = std::min(events.size(), (c + 1) * kReductionChunk);
    for (std::size_t i = c * kReductionChunk; i < end; ++i) {
      out.examples[i] = make_example(
          events[i],
          extract_features(events[i], lexicons, pipeline.users, pipeline.stats, pipeline.flags),
          clip);
    }
  });
  for (const auto& ex : out.examples) out.imputation.add(ex.features);
  return out;
}

ModelState initial_state(ModelKind kind, const Hyperparameters& hyper,
                         const FeaturePipeline& pipeline, const Clip& clip) {
  validate(hyper);
  validate(clip);
  ModelState state;
  state.kind = kind;
  state.clip = clip;
  state.hyper = hyper;
  state.flags = pipeline.flags;
  state.dense_order = canonical_dense_order();
  state.stats = pipeline.stats;
  state.users = pipeline.users;
  if (is_neural(kind)) {
    auto net = NeuralWeights::zeros(kNumDense, static_cast<std::size_t>(hyper.hidden_dim),
                                    hyper.neural_bias);
    Rng rng(derive_seed(hyper.seed, "init"));
    // Output weights start non-negative and O(1) so the initial half-life
    // clears h_min; a network starting under the clip gets no gradient.
    const double a2 = std::sqrt(6.0 / static_cast<double>(net.hidden));
    for (double& w : net.w1) w = uniform(rng, -kInitW1, kInitW1);
    for (double& w : net.w2) w = uniform(rng, 0.0, a2);
    state.params.net = std::move(net);
  }
  return state;
}

namespace {

class LinearTrainer {
 public:
  LinearTrainer(ModelState& state, std::span<const TrainingExample> examples)
      : state_(state), hyper_(state.hyper) {
    for (const auto& [key, w] : state.params.theta) intern(key);
    for (const auto& ex : examples) {
      for (const auto& t : linear_terms(state.kind, ex.features, ex.delta_days)) intern(t.key);
    }
    weights_.assign(keys_.size(), 0.0);
    counts_.assign(keys_.size(), 0.0);
    grad_.assign(keys_.size(), 0.0);
    active_.assign(keys_.size(), false);
    for (const auto& [key, w] : state.params.theta) weights_[index_.at(key)] = w;
    decay_ = 1.0 - 2.0 * hyper_.learning_rate * hyper_.lambda;
    if (hyper_.optimizer == Optimizer::sgd && !(decay_ > 0.0)) {
      throw ConfigError("2 * learning_rate * lambda must be below 1 for SGD");
    }
    recompute_norm();
  }

  // One step over a minibatch. Accumulates per-example loss terms into
  // `sums` (p, h, reg).
  void step(std::span<const TrainingExample> examples, std::span<const std::size_t> batch,
            std::array<double, 3>& sums) {
    touched_.clear();
    const bool linreg = state_.kind == ModelKind::linreg;
    const double reg = hyper_.lambda * scale_ * scale_ * sum_sq_;
    for (std::size_t idx : batch) {
      const auto& ex = examples[idx];
      terms_.clear();
      for (const auto& t : linear_terms(state_.kind, ex.features, ex.delta_days)) {
        terms_.push_back({lookup(t.key), t.value});
      }
      double raw_dot = 0.0;
      for (const auto& [k, x] : terms_) {
        double w = weight(k);
        if (linreg && k == delta_index_) w = std::min(w, 0.0);
        raw_dot += w * x;
      }
      double d_dot = 0.0;
      if (linreg) {
        const auto lg = linreg_backward(raw_dot, ex.observed_recall);
        sums[0] += lg.p_term;
        d_dot = lg.d_raw;
      } else {
        const double raw = std::exp2(raw_dot);
        const auto cg = curve_backward(raw, ex, complexity_multiplier(state_.kind, ex.features),
                                       state_.clip, hyper_.alpha);
        sums[0] += cg.p_term;
        sums[1] += cg.h_term;
        d_dot = cg.d_raw * raw * kLn2;
      }
      sums[2] += reg;
      for (const auto& [k, x] : terms_) {
        double d = d_dot * x;
        if (linreg && k == delta_index_ && weight(k) > 0.0) d = 0.0;
        accumulate(k, d);
      }
    }
    apply(static_cast<double>(batch.size()));
  }

  void finish() {
    LinearWeights theta;
    for (std::size_t k = 0; k < keys_.size(); ++k) theta[keys_[k]] = weight(k);
    state_.params.theta = std::move(theta);
  }

  void recompute_norm() {
    sum_sq_ = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if (k != bias_index_) sum_sq_ += weights_[k] * weights_[k];
    }
  }

 private:
  std::size_t lookup(std::string_view key) const {
    if (!key.starts_with(kTagPrefix)) {
      for (const auto& [name, k] : fixed_) {
        if (name == key) return k;
      }
    }
    return index_.at(std::string(key));
  }

  std::size_t intern(std::string_view key) {
    const auto [it, inserted] = index_.try_emplace(std::string(key), keys_.size());
    if (inserted) {
      keys_.emplace_back(key);
      if (!key.starts_with(kTagPrefix)) fixed_.emplace_back(keys_.back(), it->second);
      if (key == kBiasKey) bias_index_ = it->second;
      if (key == kDeltaKey) delta_index_ = it->second;
    }
    return it->second;
  }

  // Non-bias weights are stored divided by a shared scale so the L2 decay of
  // every weight costs O(1) per step.
  double weight(std::size_t k) const {
    return k == bias_index_ ? weights_[k] : scale_ * weights_[k];
  }

  void accumulate(std::size_t k, double d) {
    if (!active_[k]) {
      active_[k] = true;
      touched_.push_back(k);
    }
    grad_[k] += d;
  }

  void set_stored(std::size_t k, double v) {
    if (k != bias_index_) sum_sq_ += v * v - weights_[k] * weights_[k];
    weights_[k] = v;
  }

  void apply(double batch_size) {
    const double lr = hyper_.learning_rate;
    if (hyper_.optimizer == Optimizer::sgd) {
      scale_ *= decay_;
      for (std::size_t k : touched_) {
        const double g = grad_[k] / batch_size;
        if (k == bias_index_) {
          set_stored(k, weights_[k] - lr * g);
        } else {
          set_stored(k, weights_[k] - lr * g / scale_);
        }
      }
      if (scale_ < 1e-100) rescale();
    } else {
      // Per-feature rate lr / sqrt(1 + updates so far); L2 on active weights only.
      for (std::size_t k : touched_) {
        const double w = weight(k);
        const double g = grad_[k] / batch_size + (k == bias_index_ ? 0.0 : 2.0 * hyper_.lambda * w);
        const double rate = lr / std::sqrt(1.0 + counts_[k]);
        counts_[k] += 1.0;
        const double updated = w - rate * g;
        set_stored(k, k == bias_index_ ? updated : updated / scale_);
      }
    }
    for (std::size_t k : touched_) {
      grad_[k] = 0.0;
      active_[k] = false;
    }
  }

  void rescale() {
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if (k != bias_index_) weights_[k] *= scale_;
    }
    scale_ = 1.0;
    recompute_norm();
  }

  ModelState& state_;
  const Hyperparameters& hyper_;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, std::size_t>> fixed_;  // non-tag keys
  std::vector<double> weights_;
  std::vector<double> counts_;
  std::vector<double> grad_;
  std::vector<bool> active_;
  std::vector<std::size_t> touched_;
  std::vector<std::pair<std::size_t, double>> terms_;
  std::size_t bias_index_ = static_cast<std::size_t>(-1);
  std::size_t delta_index_ = static_cast<std::size_t>(-1);
  double scale_ = 1.0;
  double decay_ = 1.0;
  double sum_sq_ = 0.0;
};

struct NeuralChunk {
  NeuralWeights grad;
  double p_term = 0.0;
  double h_term = 0.0;
};

class NeuralTrainer {
 public:
  explicit NeuralTrainer(ModelState& state) : state_(state), hyper_(state.hyper) {
    const auto& net = state.params.net;
    counts_ = 0.0;
    chunks_.resize(num_chunks(static_cast<std::size_t>(hyper_.minibatch_size)));
    for (auto& c : chunks_) c.grad = NeuralWeights::zeros(net.inputs, net.hidden, net.has_bias);
  }

  void step(std::span<const TrainingExample> examples, std::span<const std::size_t> batch,
            std::array<double, 3>& sums) {
    auto& net = state_.params.net;
    const std::size_t n_chunks = num_chunks(batch.size());
    parallel_chunks(n_chunks, hyper_.workers, [&](std::size_t c) {
      auto& chunk = chunks_[c];
      std::fill(chunk.grad.w1.begin(), chunk.grad.w1.end(), 0.0);
      std::fill(chunk.grad.w2.begin(), chunk.grad.w2.end(), 0.0);
      std::fill(chunk.grad.b1.begin(), chunk.grad.b1.end(), 0.0);
      chunk.grad.b2 = 0.0;
      chunk.p_term = chunk.h_term = 0.0;
      const std::size_t end = std::min(batch.size(), (c + 1) * kReductionChunk);
      for (std::size_t i = c * kReductionChunk; i < end; ++i) {
        const auto cg = neural_accumulate(state_, examples[batch[i]], chunk.grad);
        chunk.p_term += cg.p_term;
        chunk.h_term += cg.h_term;
      }
    });

    auto total = NeuralWeights::zeros(net.inputs, net.hidden, net.has_bias);
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const auto& g = chunks_[c].grad;
      for (std::size_t k = 0; k < g.w1.size(); ++k) total.w1[k] += g.w1[k];
      for (std::size_t k = 0; k < g.w2.size(); ++k) total.w2[k] += g.w2[k];
      for (std::size_t k = 0; k < g.b1.size(); ++k) total.b1[k] += g.b1[k];
      total.b2 += g.b2;
      sums[0] += chunks_[c].p_term;
      sums[1] += chunks_[c].h_term;
    }
    const double reg = hyper_.lambda * squared_weight_norm(state_.params);
    sums[2] += reg * static_cast<double>(batch.size());

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : total.w1) g *= inv;
    for (double& g : total.w2) g *= inv;
    for (double& g : total.b1) g *= inv;
    total.b2 *= inv;
    add_neural_regularizer(net, hyper_.lambda, total);

    double rate = hyper_.learning_rate;
    if (hyper_.optimizer == Optimizer::adaptive) {
      rate /= std::sqrt(1.0 + counts_);
      counts_ += 1.0;
    }
    for (std::size_t k = 0; k < net.w1.size(); ++k) net.w1[k] -= rate * total.w1[k];
    for (std::size_t k = 0; k < net.w2.size(); ++k) net.w2[k] -= rate * total.w2[k];
    for (std::size_t k = 0; k < net.b1.size(); ++k) net.b1[k] -= rate * total.b1[k];
    net.b2 -= rate * total.b2;
  }

 private:
  ModelState& state_;
  const Hyperparameters& hyper_;
  std::vector<NeuralChunk> chunks_;
  double counts_ = 0.0;
};

}  // namespace

TrainResult train_model(ModelState initial, std::span<const TrainingExample> examples,
                        const Hyperparameters& hyper, const EpochCallback& on_epoch) {
  validate(hyper);
  TrainResult result;
  result.state = std::move(initial);
  result.state.hyper = hyper;
  result.train_events = examples.size();
  if (!is_trainable(result.state.kind) || hyper.epochs == 0) return result;
  if (examples.empty()) throw NoDataError("training needs at least one example");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(hyper.seed, "shuffle"));
  const auto batch_size = static_cast<std::size_t>(hyper.minibatch_size);

  auto run = [&](auto& trainer) {
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
      const auto start = std::chrono::steady_clock::now();
      shuffle(std::span(order), rng);
      std::array<double, 3> sums{};
      for (std::size_t b = 0; b < order.size(); b += batch_size) {
        const auto batch = std::span(order).subspan(b, std::min(batch_size, order.size() - b));
        trainer.step(examples, batch, sums);
      }
      const double n = static_cast<double>(examples.size());
      EpochLog log{epoch, sums[0] / n, sums[1] / n, sums[2] / n, 0.0, 0.0};
      log.total = log.p_term + log.h_term + log.reg_term;
      log.wall_seconds = seconds_since(start);
      if (!std::isfinite(log.total)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite mean loss in epoch " << epoch << " (kind "
            << to_string(result.state.kind) << ", learning rate " << hyper.learning_rate << ")";
        throw DivergenceError(msg.str());
      }
      result.log.push_back(log);
      if (on_epoch) on_epoch(log);
    }
  };

  if (is_neural(result.state.kind)) {
    NeuralTrainer trainer(result.state);
    run(trainer);
  } else {
    LinearTrainer trainer(result.state, examples);
    run(trainer);
    trainer.finish();
  }
  return result;
}

TrainResult sgd_train(std::span<const ReviewEvent> events, ModelKind kind,
                      const LexiconBundle& lexicons, const Hyperparameters& hyper,
                      const FeatureFlags& flags, const Clip& clip, const EpochCallback& on_epoch) {
  if (events.empty()) throw NoDataError("training needs at least one event");
  const auto pipeline = fit_feature_pipeline(events, lexicons, flags);
  auto data = prepare_examples(events, lexicons, pipeline, clip, hyper.workers);
  auto result = train_model(initial_state(kind, hyper, pipeline, clip), data.examples, hyper,
                            on_epoch);
  result.imputation = data.imputation;
  return result;
}

TrainResult sgd_train(std::span<const ReviewEvent> events, ModelKind kind,
                      const LexiconBundle& lexicons, const Hyperparameters& hyper,
                      const Clip& clip, const EpochCallback& on_epoch) {
  return sgd_train(events, kind, lexicons, hyper, default_feature_flags(kind), clip, on_epoch);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

namespace {

struct Sample {
  ModelState state;
  TrainingExample example;
};

// Draws a state/example pair; returns false when it sits too close to a
// clip boundary or a ReLU kink for finite differences to be meaningful.
bool draw_sample(ModelKind kind, Rng& rng, int trial, Sample& out) {
  ModelState& s = out.state;
  s = ModelState{};
  s.kind = kind;
  s.flags = default_feature_flags(kind);
  s.dense_order = canonical_dense_order();
  s.hyper = default_hyperparameters(kind);

  auto& ex = out.example;
  ex = TrainingExample{};
  auto& fv = ex.features;
  for (double& d : fv.dense) d = uniform01(rng);
  fv.history_seen = 1 + static_cast<int>(uniform_index(rng, 20));
  fv.history_correct = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(fv.history_seen) + 1));
  if (s.flags.interaction) {
    fv.interaction = std::array<double, 2>{std::sqrt(1.0 + fv.history_seen),
                                           std::sqrt(1.0 + fv.history_correct)};
  }
  if (s.flags.lexeme_tags) fv.sparse_tags = {"tag:w" + std::to_string(uniform_index(rng, 5))};
  fv.complexity_raw = uniform(rng, 0.5, 2.0);
  ex.delta_days = std::exp(uniform(rng, std::log(0.05), std::log(30.0)));
  ex.observed_recall = uniform(rng, 0.05, 0.95);
  ex.observed_h = observed_half_life(ex.observed_recall, ex.delta_days, s.clip);

  const Clip& clip = s.clip;
  if (is_neural(kind)) {
    const bool bias = trial % 2 == 1;
    auto net = NeuralWeights::zeros(kNumDense, 4, bias);
    for (double& w : net.w1) w = uniform(rng, -1.0, 1.0);
    for (double& w : net.w2) w = uniform(rng, -1.0, 3.0);
    for (double& b : net.b1) b = uniform(rng, -0.5, 0.5);
    if (bias) net.b2 = uniform(rng, -0.5, 0.5);
    s.hyper.neural_bias = bias;
    s.params.net = std::move(net);
    const auto f = neural_forward(s.params.net, fv.dense);
    for (double z : f.pre) {
      if (std::abs(z) < 1e-3) return false;
    }
    if (f.raw < clip.h_min * 1.01 || f.raw > clip.h_max * 0.99) return false;
    const double p = std::exp2(-ex.delta_days * complexity_multiplier(kind, fv) / f.raw);
    return p > clip.p_min * 10 && p < clip.p_max - 1e-3;
  }

  const auto terms = linear_terms(kind, fv, ex.delta_days);
  for (const auto& t : terms) s.params.theta[std::string(t.key)] = uniform(rng, -0.4, 0.4);
  // An inactive weight still receives the L2 gradient.
  s.params.theta["tag:inactive"] = uniform(rng, -0.4, 0.4);
  if (kind == ModelKind::linreg) {
    s.params.theta[std::string(kDeltaKey)] = uniform(rng, -0.02, -0.001);
    const double raw = linreg_raw(s.params.theta, terms);
    return raw > 0.01 && raw < 0.99;
  }
  const double raw = std::exp2(dot(s.params.theta, terms));
  if (raw < clip.h_min * 1.01 || raw > clip.h_max * 0.99) return false;
  const double p = std::exp2(-ex.delta_days * complexity_multiplier(kind, fv) / raw);
  return p > clip.p_min * 10 && p < clip.p_max - 1e-3;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

template <typename Fn>
double central_difference(double& param, Fn&& loss_fn) {
  const double saved = param;
  param = saved + kGradientCheckStep;
  const double up = loss_fn();
  param = saved - kGradientCheckStep;
  const double down = loss_fn();
  param = saved;
  return (up - down) / (2.0 * kGradientCheckStep);
}

}  // namespace

GradientCheckReport gradient_check(ModelKind kind, int num_trials, std::uint64_t seed) {
  if (!is_trainable(kind)) {
    throw InputError("gradient_check: kind '" + std::string(to_string(kind)) +
                     "' is not trainable");
  }
  GradientCheckReport report;
  report.kind = kind;
  Rng rng(derive_seed(seed, "gradient_check"));
  Sample sample;
  for (int trial = 0; trial < num_trials; ++trial) {
    while (!draw_sample(kind, rng, trial, sample)) ++report.resampled;
    ++report.trials;
    auto& state = sample.state;
    const auto analytic = gradient(state, sample.example);
    auto loss_fn = [&] { return example_loss(state, sample.example).total; };

    auto check = [&](double& param, double a) {
      report.max_relative_error =
          std::max(report.max_relative_error, relative_error(a, central_difference(param, loss_fn)));
    };
    if (is_neural(kind)) {
      auto& net = state.params.net;
      for (std::size_t k = 0; k < net.w1.size(); ++k) check(net.w1[k], analytic.net.w1[k]);
      for (std::size_t k = 0; k < net.w2.size(); ++k) check(net.w2[k], analytic.net.w2[k]);
      for (std::size_t k = 0; k < net.b1.size(); ++k) check(net.b1[k], analytic.net.b1[k]);
      if (net.has_bias) check(net.b2, analytic.net.b2);
    } else {
      for (auto& [key, w] : state.params.theta) {
        const auto it = analytic.theta.find(key);
        check(w, it == analytic.theta.end() ? 0.0 : it->second);
      }
    }
  }
  report.passed = report.max_relative_error < kGradientCheckTolerance;
  return report;
}

}  // namespace fcurve
