#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcurve/features.hpp"
#include "fcurve/model.hpp"

namespace fcurve {

// Mean of |observed - predicted| over (observed, predicted) pairs. Throws
// InputError on empty input.
double mae(std::span<const std::pair<double, double>> pairs);

struct EvalReport {
  ModelKind kind = ModelKind::hlr;
  std::size_t num_events = 0;
  double mae = 0.0;
  double mean_p_hat = 0.0;
  double mean_observed = 0.0;
  ImputationCounts imputation;
  double runtime_seconds = 0.0;  // metadata, excluded from deterministic output
};

// Predicts every event with the model's stored normalization and user index.
// Never modifies the model. Throws StructuralError when the model's dense
// feature order differs from this build's extractor.
EvalReport evaluate(const ModelState& state, std::span<const ReviewEvent> events,
                    const LexiconBundle& lexicons, int workers = 1);

// MAE of the best constant predictor (the median of the observed recall).
double best_constant_mae(std::span<const ReviewEvent> events);

// |W1| rescaled to [0, 1] over the whole matrix; rows follow the dense
// feature order.
struct HiddenWeightExport {
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;
  std::vector<std::vector<double>> matrix;
  std::vector<double> row_means;

  // Row indices by decreasing mean; ties keep feature order.
  std::vector<std::size_t> ranking() const;
};

// Throws InputError for non-neural kinds.
HiddenWeightExport export_hidden_weights(const ModelState& state);

struct LadderRow {
  ModelKind kind = ModelKind::hlr;
  bool ok = false;
  std::string error;
  std::size_t train_events = 0;
  double train_mae = 0.0;
  EvalReport test;
  double train_seconds = 0.0;  // metadata
};

// Aligned text table, one row per kind.
std::string format_ladder_table(std::span<const LadderRow> rows);

}  // namespace fcurve
