#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fcurve/dataset.hpp"

namespace fcurve {

// Dense model inputs. The order is fixed: it is the row order of the hidden
// weight export and of W1.
enum class DenseFeature : std::uint8_t {
  user_id = 0,
  concreteness = 1,
  percent_known = 2,
  subtlex = 3,
  complexity = 4,
};

inline constexpr std::size_t kNumDense = 5;

// Keys used in weight maps and JSON.
inline constexpr std::array<std::string_view, kNumDense> kDenseFeatureNames = {
    "user_id", "concreteness", "percent_known", "subtlex", "complexity"};

// Human-facing row labels for the hidden weight heatmap.
inline constexpr std::array<std::string_view, kNumDense> kDenseFeatureLabels = {
    "user id", "concreteness", "percent known", "SUBTLEX", "complexity"};

inline constexpr std::size_t index_of(DenseFeature f) { return static_cast<std::size_t>(f); }

// ---------------------------------------------------------------------------
// Lexicons

enum class LexiconKind { complexity, concreteness_norms, subtlex };

std::string_view to_string(LexiconKind kind);
LexiconKind lexicon_kind_from_string(std::string_view name);

// Per-word scores. A field is empty when the source lexicon lacks the word.
struct LexicalFeatures {
  std::optional<double> complexity;
  std::optional<double> concreteness;   // native 1-5 rating scale
  std::optional<double> percent_known;  // fraction in [0, 1]
  std::optional<double> log_frequency;  // log10(count + 1)
};

using Lexicon = std::unordered_map<std::string, LexicalFeatures>;

// Which header columns feed which field. Empty names fall back to the
// defaults of the kind:
//   complexity          word, complexity
//   concreteness_norms  Word, Conc.M, Percent_known
//   subtlex             Word, FREQcount
// Header matching is case-insensitive.
struct LexiconColumns {
  std::string word;
  std::string value;   // complexity score / concreteness mean / frequency count
  std::string value2;  // percent known (concreteness_norms only)
};

struct LexiconSource {
  std::string path;
  LexiconKind kind = LexiconKind::complexity;
  LexiconColumns columns;
};

struct LexiconLoadResult {
  Lexicon entries;
  std::size_t duplicates = 0;  // later rows for an already-seen word
  std::size_t skipped_rows = 0;
  std::vector<std::string> warnings;
};

// Loads one delimited lexicon file (comma or tab, detected from the header).
// Throws InputError if the file cannot be opened, FormatError naming the
// column when a mapped column is missing.
LexiconLoadResult load_lexicon(const std::string& path, LexiconKind kind,
                               const LexiconColumns& columns = {});

// Union of the loaded lexicons, keyed by lowercase word.
class LexiconBundle {
 public:
  void merge(const LexiconLoadResult& loaded);
  const LexicalFeatures* find(std::string_view word) const;
  std::size_t size() const { return words_.size(); }

  static LexiconBundle load(std::span<const LexiconSource> sources,
                            std::vector<std::string>* warnings = nullptr);

 private:
  Lexicon words_;
};

// ---------------------------------------------------------------------------
// User scalarization

inline constexpr double kUnseenUserScalar = 0.5;

// user_id -> rank / (num_users - 1) by first appearance; a lone user is 0.
class UserIndex {
 public:
  UserIndex() = default;
  explicit UserIndex(std::vector<std::string> users_in_order);

  // nullopt for users not present at build time.
  std::optional<double> find(std::string_view user_id) const;
  const std::vector<std::string>& users() const { return users_; }
  std::size_t size() const { return users_.size(); }

 private:
  std::vector<std::string> users_;
  std::unordered_map<std::string, double> scalar_;
};

UserIndex build_user_index(std::span<const ReviewEvent> events);

// ---------------------------------------------------------------------------
// Normalization

struct FeatureRange {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;  // also the imputation value for missing words

  // Min-max to [0, 1], clamped; a degenerate range maps to 0.
  double normalize(double raw) const;

  bool operator==(const FeatureRange&) const = default;
};

// Fit on the training split only. Ranges are over raw feature values
// (log frequency for SUBTLEX), event-weighted, ignoring missing entries.
struct NormalizationStats {
  std::array<FeatureRange, kNumDense> ranges{};
  double complexity_mean = 1.0;  // raw complexity mean; complexity_raw = C / mean

  bool operator==(const NormalizationStats&) const = default;
};

struct FeatureFlags {
  bool lexeme_tags = false;
  bool interaction = true;

  bool operator==(const FeatureFlags&) const = default;
};

// Model input for one event.
struct FeatureVector {
  std::array<double, kNumDense> dense{};  // each in [0, 1]
  std::vector<std::string> sparse_tags;   // lexeme-tag keys, if enabled
  std::optional<std::array<double, 2>> interaction;  // sqrt(1+seen), sqrt(1+correct)
  double complexity_raw = 1.0;  // complexity rescaled to training mean 1
  int history_seen = 1;
  int history_correct = 0;
  std::uint8_t imputed = 0;  // bit i set when dense feature i was imputed

  bool is_imputed(DenseFeature f) const { return (imputed >> index_of(f)) & 1U; }
};

NormalizationStats fit_normalization(std::span<const ReviewEvent> train,
                                     const LexiconBundle& lexicons, const UserIndex& users);

FeatureVector extract_features(const ReviewEvent& event, const LexiconBundle& lexicons,
                               const UserIndex& users, const NormalizationStats& stats,
                               const FeatureFlags& flags);

struct ImputationCounts {
  std::size_t events = 0;
  std::array<std::size_t, kNumDense> misses{};

  void add(const FeatureVector& fv);
  bool operator==(const ImputationCounts&) const = default;
};

}  // namespace fcurve
