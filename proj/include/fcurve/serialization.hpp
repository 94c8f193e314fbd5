#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "fcurve/evaluation.hpp"
#include "fcurve/model.hpp"
#include "fcurve/training.hpp"

namespace fcurve {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

// One document per model: kind, clip, hyperparameters, flags, dense order,
// theta or W1/W2 (row-major), normalization stats with imputation means,
// and the user index. Reals round-trip bit-exactly.
json model_to_json(const ModelState& state);
ModelState model_from_json(const json& doc);  // throws StructuralError

void save_model(const std::string& path, const ModelState& state);
ModelState load_model(const std::string& path);

json to_json(const Hyperparameters& hyper);
Hyperparameters hyperparameters_from_json(const json& doc, Hyperparameters base);

json to_json(const ImputationCounts& counts);
// Deterministic fields only; runtime goes to metadata.
json to_json(const EvalReport& report);
json to_json(const EpochLog& log);
json to_json(const HiddenWeightExport& exported);
json to_json(const GradientCheckReport& report);
// Deterministic fields only.
json ladder_to_json(std::span<const LadderRow> rows);
json ladder_metadata_to_json(std::span<const LadderRow> rows);

// Writes to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);  // throws InputError

}  // namespace fcurve
