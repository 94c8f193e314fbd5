#include "fcurve/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <system_error>

#include "fcurve/errors.hpp"

namespace fcurve {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

LexiconColumns resolve_columns(LexiconKind kind, const LexiconColumns& given) {
  LexiconColumns c = given;
  switch (kind) {
    case LexiconKind::complexity:
      if (c.word.empty()) c.word = "word";
      if (c.value.empty()) c.value = "complexity";
      break;
    case LexiconKind::concreteness_norms:
      if (c.word.empty()) c.word = "Word";
      if (c.value.empty()) c.value = "Conc.M";
      if (c.value2.empty()) c.value2 = "Percent_known";
      break;
    case LexiconKind::subtlex:
      if (c.word.empty()) c.word = "Word";
      if (c.value.empty()) c.value = "FREQcount";
      break;
  }
  return c;
}

// Concreteness norms are rated on a 1-5 scale.
constexpr double kConcretenessMin = 1.0;
constexpr double kConcretenessMax = 5.0;

}  // namespace

std::string_view to_string(LexiconKind kind) {
  switch (kind) {
    case LexiconKind::complexity: return "complexity";
    case LexiconKind::concreteness_norms: return "concreteness_norms";
    case LexiconKind::subtlex: return "subtlex";
  }
  return "?";
}

LexiconKind lexicon_kind_from_string(std::string_view name) {
  if (name == "complexity") return LexiconKind::complexity;
  if (name == "concreteness_norms" || name == "concreteness") return LexiconKind::concreteness_norms;
  if (name == "subtlex") return LexiconKind::subtlex;
  throw ConfigError("unknown lexicon kind '" + std::string(name) + "'");
}

LexiconLoadResult load_lexicon(const std::string& path, LexiconKind kind,
                               const LexiconColumns& columns) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open lexicon file: " + path);

  LexiconLoadResult out;
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    out.warnings.push_back("lexicon " + path + " is empty");
    return out;
  }
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  std::vector<std::string_view> fields;
  split_csv_line(line, delim, fields);
  std::vector<std::string> header;
  for (auto f : fields) header.push_back(lowercase(trim(f)));

  const LexiconColumns cols = resolve_columns(kind, columns);
  auto column_index = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), lowercase(name));
    if (it == header.end()) {
      throw FormatError("lexicon " + path + " (" + std::string(to_string(kind)) +
                        "): missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t word_col = column_index(cols.word);
  const std::size_t value_col = column_index(cols.value);
  const std::size_t value2_col =
      kind == LexiconKind::concreteness_norms ? column_index(cols.value2) : value_col;
  const std::size_t needed = std::max({word_col, value_col, value2_col}) + 1;

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    split_csv_line(line, delim, fields);
    if (fields.size() < needed) {
      ++out.skipped_rows;
      continue;
    }
    const std::string word = lowercase(trim(fields[word_col]));
    double value = 0;
    if (word.empty() || !parse_double(fields[value_col], value)) {
      ++out.skipped_rows;
      continue;
    }
    LexicalFeatures features;
    switch (kind) {
      case LexiconKind::complexity:
        if (value < 0) {
          ++out.skipped_rows;
          continue;
        }
        features.complexity = value;
        break;
      case LexiconKind::concreteness_norms: {
        double known = 0;
        if (!parse_double(fields[value2_col], known)) {
          ++out.skipped_rows;
          continue;
        }
        // Accept either a fraction or a percentage.
        if (known > 1.0) known /= 100.0;
        if (value < kConcretenessMin || value > kConcretenessMax || known < 0 || known > 1) {
          ++out.skipped_rows;
          continue;
        }
        features.concreteness = value;
        features.percent_known = known;
        break;
      }
      case LexiconKind::subtlex:
        if (value < 0) {
          ++out.skipped_rows;
          continue;
        }
        features.log_frequency = std::log10(value + 1.0);
        break;
    }
    if (!out.entries.emplace(word, features).second) ++out.duplicates;
  }
  if (out.entries.empty()) out.warnings.push_back("lexicon " + path + " has no usable rows");
  if (out.duplicates > 0) {
    out.warnings.push_back("lexicon " + path + ": " + std::to_string(out.duplicates) +
                           " duplicate words, first occurrence kept");
  }
  if (out.skipped_rows > 0) {
    out.warnings.push_back("lexicon " + path + ": " + std::to_string(out.skipped_rows) +
                           " unparseable rows skipped");
  }
  return out;
}

void LexiconBundle::merge(const LexiconLoadResult& loaded) {
  for (const auto& [word, incoming] : loaded.entries) {
    auto& slot = words_[word];
    if (!slot.complexity) slot.complexity = incoming.complexity;
    if (!slot.concreteness) slot.concreteness = incoming.concreteness;
    if (!slot.percent_known) slot.percent_known = incoming.percent_known;
    if (!slot.log_frequency) slot.log_frequency = incoming.log_frequency;
  }
}

const LexicalFeatures* LexiconBundle::find(std::string_view word) const {
  const auto it = words_.find(std::string(word));
  return it == words_.end() ? nullptr : &it->second;
}

LexiconBundle LexiconBundle::load(std::span<const LexiconSource> sources,
                                  std::vector<std::string>* warnings) {
  LexiconBundle bundle;
  for (const auto& source : sources) {
    auto loaded = load_lexicon(source.path, source.kind, source.columns);
    if (warnings) warnings->insert(warnings->end(), loaded.warnings.begin(), loaded.warnings.end());
    bundle.merge(loaded);
  }
  return bundle;
}

UserIndex::UserIndex(std::vector<std::string> users_in_order) : users_(std::move(users_in_order)) {
  const std::size_t n = users_.size();
  scalar_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    scalar_.emplace(users_[i], s);
  }
}

std::optional<double> UserIndex::find(std::string_view user_id) const {
  const auto it = scalar_.find(std::string(user_id));
  if (it == scalar_.end()) return std::nullopt;
  return it->second;
}

UserIndex build_user_index(std::span<const ReviewEvent> events) {
  std::vector<std::string> order;
  std::unordered_map<std::string_view, bool> seen;
  for (const auto& ev : events) {
    if (seen.emplace(ev.user_id, true).second) order.push_back(ev.user_id);
  }
  return UserIndex(std::move(order));
}

double FeatureRange::normalize(double raw) const {
  const double span = max - min;
  if (!(span > 0.0)) return 0.0;
  return std::clamp((raw - min) / span, 0.0, 1.0);
}

namespace {

// Raw (pre-normalization) lexical values for a word, one per dense slot.
std::array<std::optional<double>, kNumDense> raw_lexical(const LexicalFeatures* lex) {
  std::array<std::optional<double>, kNumDense> raw{};
  if (!lex) return raw;
  raw[index_of(DenseFeature::concreteness)] = lex->concreteness;
  raw[index_of(DenseFeature::percent_known)] = lex->percent_known;
  raw[index_of(DenseFeature::subtlex)] = lex->log_frequency;
  raw[index_of(DenseFeature::complexity)] = lex->complexity;
  return raw;
}

}  // namespace

NormalizationStats fit_normalization(std::span<const ReviewEvent> train,
                                     const LexiconBundle& lexicons, const UserIndex& users) {
  std::array<double, kNumDense> lo, hi, sum{};
  std::array<std::size_t, kNumDense> count{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());

  auto observe = [&](std::size_t i, double v) {
    lo[i] = std::min(lo[i], v);
    hi[i] = std::max(hi[i], v);
    sum[i] += v;
    ++count[i];
  };

  for (const auto& ev : train) {
    auto raw = raw_lexical(lexicons.find(parse_lexeme(ev.lexeme_string).surface_word));
    if (auto u = users.find(ev.user_id)) raw[index_of(DenseFeature::user_id)] = *u;
    for (std::size_t i = 0; i < kNumDense; ++i) {
      if (raw[i]) observe(i, *raw[i]);
    }
  }

  NormalizationStats stats;
  for (std::size_t i = 0; i < kNumDense; ++i) {
    if (count[i] == 0) continue;
    stats.ranges[i] = {lo[i], hi[i], sum[i] / static_cast<double>(count[i])};
  }
  const double cmean = stats.ranges[index_of(DenseFeature::complexity)].mean;
  stats.complexity_mean = cmean > 0.0 ? cmean : 1.0;
  return stats;
}

FeatureVector extract_features(const ReviewEvent& event, const LexiconBundle& lexicons,
                               const UserIndex& users, const NormalizationStats& stats,
                               const FeatureFlags& flags) {
  FeatureVector fv;
  const Lexeme lexeme = parse_lexeme(event.lexeme_string);
  const auto raw = raw_lexical(lexicons.find(lexeme.surface_word));

  // The user scalar is already rank-normalized.
  constexpr auto kUser = index_of(DenseFeature::user_id);
  if (auto u = users.find(event.user_id)) {
    fv.dense[kUser] = *u;
  } else {
    fv.dense[kUser] = kUnseenUserScalar;
    fv.imputed |= 1U << kUser;
  }

  double complexity = stats.complexity_mean;
  for (std::size_t i = 1; i < kNumDense; ++i) {
    double value = stats.ranges[i].mean;
    if (raw[i]) {
      value = *raw[i];
    } else {
      fv.imputed |= static_cast<std::uint8_t>(1U << i);
    }
    if (i == index_of(DenseFeature::complexity)) complexity = value;
    fv.dense[i] = stats.ranges[i].normalize(value);
  }
  fv.complexity_raw = complexity / stats.complexity_mean;

  fv.history_seen = event.history_seen;
  fv.history_correct = event.history_correct;
  if (flags.interaction) {
    fv.interaction = std::array<double, 2>{std::sqrt(1.0 + event.history_seen),
                                           std::sqrt(1.0 + event.history_correct)};
  }
  if (flags.lexeme_tags) {
    fv.sparse_tags.push_back("tag:" + (lexeme.tag.empty() ? lexeme.surface_word : lexeme.tag));
  }
  return fv;
}

void ImputationCounts::add(const FeatureVector& fv) {
  ++events;
  for (std::size_t i = 0; i < kNumDense; ++i) misses[i] += (fv.imputed >> i) & 1U;
}

}  // namespace fcurve
