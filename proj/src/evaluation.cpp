#include "fcurve/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fcurve/errors.hpp"
#include "fcurve/parallel.hpp"

namespace fcurve {

double mae(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw InputError("mae of an empty set is undefined");
  double sum = 0.0;
  for (const auto& [observed, predicted] : pairs) sum += std::abs(observed - predicted);
  return sum / static_cast<double>(pairs.size());
}

EvalReport evaluate(const ModelState& state, std::span<const ReviewEvent> events,
                    const LexiconBundle& lexicons, int workers) {
  validate(state);
  if (events.empty()) throw NoDataError("evaluate: no events");
  const auto start = std::chrono::steady_clock::now();

  struct Partial {
    double abs_err = 0.0;
    double p_hat = 0.0;
    double observed = 0.0;
    ImputationCounts imputation;
  };
  std::vector<Partial> partials(num_chunks(events.size()));
  parallel_chunks(partials.size(), workers, [&](std::size_t c) {
    auto& part = partials[c];
    const std::size_t end = std::min(events.size(), (c + 1) * kReductionChunk);
    for (std::size_t i = c * kReductionChunk; i < end; ++i) {
      const auto& ev = events[i];
      const auto fv = extract_features(ev, lexicons, state.users, state.stats, state.flags);
      const auto pred = predict(state, fv, ev.delta_days);
      part.abs_err += std::abs(ev.observed_recall - pred.p_hat);
      part.p_hat += pred.p_hat;
      part.observed += ev.observed_recall;
      part.imputation.add(fv);
    }
  });

  EvalReport report;
  report.kind = state.kind;
  report.num_events = events.size();
  double abs_err = 0.0, p_hat = 0.0, observed = 0.0;
  for (const auto& part : partials) {
    abs_err += part.abs_err;
    p_hat += part.p_hat;
    observed += part.observed;
    report.imputation.events += part.imputation.events;
    for (std::size_t i = 0; i < kNumDense; ++i) {
      report.imputation.misses[i] += part.imputation.misses[i];
    }
  }
  const double n = static_cast<double>(events.size());
  report.mae = abs_err / n;
  report.mean_p_hat = p_hat / n;
  report.mean_observed = observed / n;
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double best_constant_mae(std::span<const ReviewEvent> events) {
  if (events.empty()) throw InputError("best_constant_mae: no events");
  std::vector<double> observed;
  observed.reserve(events.size());
  for (const auto& ev : events) observed.push_back(ev.observed_recall);
  const auto mid = observed.begin() + static_cast<std::ptrdiff_t>(observed.size() / 2);
  std::nth_element(observed.begin(), mid, observed.end());
  const double median = *mid;
  double sum = 0.0;
  for (const auto& ev : events) sum += std::abs(ev.observed_recall - median);
  return sum / static_cast<double>(events.size());
}

std::vector<std::size_t> HiddenWeightExport::ranking() const {
  std::vector<std::size_t> order(row_means.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row_means[a] > row_means[b]; });
  return order;
}

HiddenWeightExport export_hidden_weights(const ModelState& state) {
  if (!is_neural(state.kind)) {
    throw InputError("hidden weight export needs a neural model, got '" +
                     std::string(to_string(state.kind)) + "'");
  }
  validate(state);
  const auto& net = state.params.net;
  HiddenWeightExport out;
  for (auto label : kDenseFeatureLabels) out.row_labels.emplace_back(label);
  for (std::size_t j = 0; j < net.hidden; ++j) out.column_labels.push_back("h" + std::to_string(j));

  double lo = std::abs(net.w1.front());
  double hi = lo;
  for (double w : net.w1) {
    lo = std::min(lo, std::abs(w));
    hi = std::max(hi, std::abs(w));
  }
  const double range = hi - lo;
  out.matrix.assign(net.inputs, std::vector<double>(net.hidden, 0.0));
  out.row_means.assign(net.inputs, 0.0);
  for (std::size_t i = 0; i < net.inputs; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < net.hidden; ++j) {
      const double v = range > 0.0 ? (std::abs(net.w1_at(i, j)) - lo) / range : 0.0;
      out.matrix[i][j] = v;
      sum += v;
    }
    out.row_means[i] = sum / static_cast<double>(net.hidden);
  }
  return out;
}

std::string format_ladder_table(std::span<const LadderRow> rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %12s %10s\n", "model", "test_mae",
                "train_mae", "mean_p_hat", "mean_observed", "events");
  out << line;
  for (const auto& row : rows) {
    const auto name = std::string(to_string(row.kind));
    if (!row.ok) {
      std::snprintf(line, sizeof line, "%-12s %10s  %s\n", name.c_str(), "FAILED",
                    row.error.c_str());
    } else {
      std::snprintf(line, sizeof line, "%-12s %10.4f %10.4f %10.4f %12.4f %10zu\n", name.c_str(),
                    row.test.mae, row.train_mae, row.test.mean_p_hat, row.test.mean_observed,
                    row.test.num_events);
    }
    out << line;
  }
  return out.str();
}

}  // namespace fcurve
