#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fcurve {

inline constexpr double kSecondsPerDay = 86400.0;

// One learner-word practice record from the review log.
struct ReviewEvent {
  double observed_recall = 0.0;  // session_correct / session_seen
  double delta_days = 0.0;
  std::string user_id;
  std::string lexeme_id;
  std::string lexeme_string;
  std::string ui_language;
  int history_seen = 1;
  int history_correct = 0;
  int session_seen = 1;
  int session_correct = 0;
  std::int64_t timestamp = 0;

  int history_wrong() const { return history_seen - history_correct; }
};

// The 12 columns of the public review dump, in canonical order.
inline constexpr std::string_view kReviewLogColumns[] = {
    "p_recall",       "timestamp",     "delta",           "user_id",
    "learning_language", "ui_language", "lexeme_id",      "lexeme_string",
    "history_seen",   "history_correct", "session_seen",  "session_correct"};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_malformed = 0;
  std::size_t rows_filtered_out = 0;  // other learning languages
  std::size_t events = 0;
};

// Streaming reader over a review log. Holds one line at a time, so memory
// use does not depend on the file length. Throws FormatError from the
// constructor if the header is missing or names an unknown column.
class ReviewLogReader {
 public:
  ReviewLogReader(std::istream& in, std::string learning_language);

  // Next event for the configured language, or nullopt at end of stream.
  // Rows that fail to parse or violate the event invariants are counted in
  // stats().rows_malformed and skipped.
  std::optional<ReviewEvent> next();

  const IngestStats& stats() const { return stats_; }

 private:
  bool parse_row(ReviewEvent& out) const;

  std::istream& in_;
  std::string language_;
  std::vector<int> column_of_;  // indexed by canonical column, -1 if absent
  std::size_t num_columns_ = 0;
  std::string line_;
  std::vector<std::string_view> fields_;
  IngestStats stats_;
};

struct ParsedLog {
  std::vector<ReviewEvent> events;
  IngestStats stats;
};

// Reads the whole stream. `limit` caps the number of kept events (0 = all).
// Throws NoDataError when nothing survives the language filter.
ParsedLog parse_review_log(std::istream& in, const std::string& learning_language,
                           std::size_t limit = 0);
ParsedLog load_review_log(const std::string& path, const std::string& learning_language,
                          std::size_t limit = 0);

// Re-emits events in the 12-column schema. learning_language is written as
// given since events only carry the filtered language implicitly.
void write_review_log(std::ostream& out, std::span<const ReviewEvent> events,
                      std::string_view learning_language);
void write_review_log_header(std::ostream& out);
void write_review_log_row(std::ostream& out, const ReviewEvent& event,
                          std::string_view learning_language);

struct Lexeme {
  std::string surface_word;  // lowercased headword, the lexicon key
  std::string tag;           // remainder, the sparse feature key
};

// Splits at the first '/' or '.', whichever comes first:
//   "camera.N.SG"           -> ("camera", "N.SG")
//   "camera/camera<n><sg>"  -> ("camera", "camera<n><sg>")
Lexeme parse_lexeme(std::string_view lexeme_string);

enum class SplitMode { random, chronological };

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::random;
};

struct Split {
  std::vector<ReviewEvent> train;
  std::vector<ReviewEvent> test;
};

// Exact partition of `events`. Random mode is a seeded Fisher-Yates shuffle;
// chronological mode is a stable sort on timestamp. The train side gets
// round(n * train_fraction) events; an empty side is an error.
Split split_train_test(std::span<const ReviewEvent> events, const SplitSpec& spec);

std::string_view to_string(SplitMode mode);
SplitMode split_mode_from_string(std::string_view name);

// Comma-separated field splitter with double-quote support.
void split_csv_line(std::string_view line, char delimiter,
                    std::vector<std::string_view>& fields);

}  // namespace fcurve
