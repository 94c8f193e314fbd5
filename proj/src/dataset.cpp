#include "fcurve/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <system_error>

#include "fcurve/errors.hpp"
#include "fcurve/rng.hpp"

namespace fcurve {
namespace {

enum Column : int {
  kPRecall = 0,
  kTimestamp,
  kDelta,
  kUserId,
  kLearningLanguage,
  kUiLanguage,
  kLexemeId,
  kLexemeString,
  kHistorySeen,
  kHistoryCorrect,
  kSessionSeen,
  kSessionCorrect,
  kNumColumns,
};

constexpr Column kRequired[] = {kTimestamp,     kDelta,          kUserId,
                                kLearningLanguage, kLexemeId,    kLexemeString,
                                kHistorySeen,   kHistoryCorrect, kSessionSeen,
                                kSessionCorrect};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

// Integer columns occasionally appear as "3.0" in derived dumps.
bool parse_count(std::string_view text, int& out) {
  if (parse_number(text, out)) return true;
  double value = 0;
  if (!parse_number(text, value) || !std::isfinite(value) || value != std::floor(value) ||
      std::abs(value) > 1e9) {
    return false;
  }
  out = static_cast<int>(value);
  return true;
}

}  // namespace

void split_csv_line(std::string_view line, char delimiter, std::vector<std::string_view>& fields) {
  fields.clear();
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::size_t pos = 0;
  while (true) {
    if (pos < line.size() && line[pos] == '"') {
      // Quoted field: ends at the next quote not doubled. Inner "" stay as-is.
      std::size_t end = pos + 1;
      while (end < line.size()) {
        if (line[end] == '"') {
          if (end + 1 < line.size() && line[end + 1] == '"') {
            end += 2;
            continue;
          }
          break;
        }
        ++end;
      }
      fields.push_back(line.substr(pos + 1, std::min(end, line.size()) - pos - 1));
      pos = line.find(delimiter, end);
    } else {
      const std::size_t end = line.find(delimiter, pos);
      fields.push_back(line.substr(pos, end == std::string_view::npos ? end : end - pos));
      pos = end;
    }
    if (pos == std::string_view::npos) break;
    ++pos;
  }
}

ReviewLogReader::ReviewLogReader(std::istream& in, std::string learning_language)
    : in_(in), language_(std::move(learning_language)), column_of_(kNumColumns, -1) {
  std::string header;
  if (!std::getline(in_, header) || trim(header).empty()) {
    throw FormatError("review log: missing header row");
  }
  split_csv_line(header, ',', fields_);
  num_columns_ = fields_.size();
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const auto name = trim(fields_[i]);
    const auto* it = std::find(std::begin(kReviewLogColumns), std::end(kReviewLogColumns), name);
    if (it == std::end(kReviewLogColumns)) {
      throw FormatError("review log: unknown column '" + std::string(name) + "'");
    }
    const auto canonical = static_cast<std::size_t>(it - std::begin(kReviewLogColumns));
    if (column_of_[canonical] != -1) {
      throw FormatError("review log: duplicate column '" + std::string(name) + "'");
    }
    column_of_[canonical] = static_cast<int>(i);
  }
  for (Column c : kRequired) {
    if (column_of_[c] == -1) {
      throw FormatError("review log: missing column '" + std::string(kReviewLogColumns[c]) + "'");
    }
  }
}

bool ReviewLogReader::parse_row(ReviewEvent& ev) const {
  if (fields_.size() != num_columns_) return false;
  auto field = [&](Column c) { return trim(fields_[static_cast<std::size_t>(column_of_[c])]); };

  double delta_seconds = 0;
  if (!parse_number(field(kTimestamp), ev.timestamp)) return false;
  if (!parse_number(field(kDelta), delta_seconds) || !std::isfinite(delta_seconds)) return false;
  if (!parse_count(field(kHistorySeen), ev.history_seen)) return false;
  if (!parse_count(field(kHistoryCorrect), ev.history_correct)) return false;
  if (!parse_count(field(kSessionSeen), ev.session_seen)) return false;
  if (!parse_count(field(kSessionCorrect), ev.session_correct)) return false;

  if (delta_seconds < 0 || ev.history_seen < 1 || ev.history_correct < 0 ||
      ev.history_correct > ev.history_seen || ev.session_seen < 1 || ev.session_correct < 0 ||
      ev.session_correct > ev.session_seen) {
    return false;
  }
  const auto lexeme = field(kLexemeString);
  const auto user = field(kUserId);
  if (lexeme.empty() || user.empty()) return false;

  ev.delta_days = delta_seconds / kSecondsPerDay;
  ev.observed_recall = static_cast<double>(ev.session_correct) / ev.session_seen;
  ev.user_id.assign(user);
  ev.lexeme_id.assign(field(kLexemeId));
  ev.lexeme_string.assign(lexeme);
  if (column_of_[kUiLanguage] >= 0) {
    ev.ui_language.assign(field(kUiLanguage));
  } else {
    ev.ui_language.clear();
  }
  return true;
}

std::optional<ReviewEvent> ReviewLogReader::next() {
  while (std::getline(in_, line_)) {
    if (trim(line_).empty()) continue;
    ++stats_.rows_read;
    split_csv_line(line_, ',', fields_);
    if (fields_.size() != num_columns_) {
      ++stats_.rows_malformed;
      continue;
    }
    const auto lang = trim(fields_[static_cast<std::size_t>(column_of_[kLearningLanguage])]);
    if (lang != language_) {
      ++stats_.rows_filtered_out;
      continue;
    }
    ReviewEvent ev;
    if (!parse_row(ev)) {
      ++stats_.rows_malformed;
      continue;
    }
    ++stats_.events;
    return ev;
  }
  return std::nullopt;
}

ParsedLog parse_review_log(std::istream& in, const std::string& learning_language,
                           std::size_t limit) {
  ReviewLogReader reader(in, learning_language);
  ParsedLog out;
  while (limit == 0 || out.events.size() < limit) {
    auto ev = reader.next();
    if (!ev) break;
    out.events.push_back(std::move(*ev));
  }
  out.stats = reader.stats();
  if (out.events.empty()) {
    throw NoDataError("review log: no data for learning language '" + learning_language +
                      "' (" + std::to_string(out.stats.rows_read) + " rows read, " +
                      std::to_string(out.stats.rows_malformed) + " malformed)");
  }
  return out;
}

ParsedLog load_review_log(const std::string& path, const std::string& learning_language,
                          std::size_t limit) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open review log: " + path);
  return parse_review_log(in, learning_language, limit);
}

void write_review_log_header(std::ostream& out) {
  for (std::size_t i = 0; i < std::size(kReviewLogColumns); ++i) {
    out << (i ? "," : "") << kReviewLogColumns[i];
  }
  out << '\n';
}

void write_review_log_row(std::ostream& out, const ReviewEvent& ev,
                          std::string_view learning_language) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, ev.observed_recall);
  out << std::string_view(buf, static_cast<std::size_t>(end - buf)) << ',' << ev.timestamp << ','
      << std::llround(ev.delta_days * kSecondsPerDay) << ',' << ev.user_id << ','
      << learning_language << ',' << ev.ui_language << ',' << ev.lexeme_id << ','
      << ev.lexeme_string << ',' << ev.history_seen << ',' << ev.history_correct << ','
      << ev.session_seen << ',' << ev.session_correct << '\n';
}

void write_review_log(std::ostream& out, std::span<const ReviewEvent> events,
                      std::string_view learning_language) {
  write_review_log_header(out);
  for (const auto& ev : events) write_review_log_row(out, ev, learning_language);
}

Lexeme parse_lexeme(std::string_view lexeme_string) {
  const std::size_t cut = lexeme_string.find_first_of("/.");
  Lexeme out;
  const auto head = cut == std::string_view::npos ? lexeme_string : lexeme_string.substr(0, cut);
  out.surface_word.reserve(head.size());
  for (char c : head) {
    out.surface_word.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (cut != std::string_view::npos) out.tag.assign(lexeme_string.substr(cut + 1));
  return out;
}

Split split_train_test(std::span<const ReviewEvent> events, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
  if (events.size() < 2) throw NoDataError("split needs at least 2 events");

  const std::size_t n = events.size();
  const auto n_train =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.train_fraction));
  if (n_train == 0 || n_train >= n) {
    throw ConfigError("train_fraction " + std::to_string(spec.train_fraction) + " leaves an empty " +
                      (n_train == 0 ? "train" : "test") + " side for " + std::to_string(n) +
                      " events");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (spec.mode == SplitMode::random) {
    Rng rng(spec.seed);
    shuffle(std::span(order), rng);
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return events[a].timestamp < events[b].timestamp;
    });
  }

  Split out;
  out.train.reserve(n_train);
  out.test.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.train : out.test).push_back(events[order[i]]);
  }
  return out;
}

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::random ? "random" : "chronological";
}

SplitMode split_mode_from_string(std::string_view name) {
  if (name == "random") return SplitMode::random;
  if (name == "chronological") return SplitMode::chronological;
  throw ConfigError("unknown split mode '" + std::string(name) + "'");
}

}  // namespace fcurve
