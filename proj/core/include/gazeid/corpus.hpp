#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gazeid {

/// Tolerated distance (in characters) of a fixation beyond the first/last word.
inline constexpr double kPositionMargin = 2.0;

struct Word {
  double left = 0.0;
  double right = 0.0;

  double center() const { return 0.5 * (left + right); }
  bool contains(double x) const { return left <= x && x <= right; }
};

/// One line of text in a one-dimensional character coordinate system.
class TextLine {
 public:
  /// Throws CorpusError unless the words are non-empty, proper and strictly ordered.
  TextLine(std::string text_id, std::vector<Word> words);

  const std::string& id() const { return id_; }
  std::span<const Word> words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  const Word& word(std::size_t i) const { return words_[i]; }

  double line_begin() const { return words_.front().left; }
  double line_end() const { return words_.back().right; }

  /// Index of the word a position is attributed to: the containing word, else
  /// the nearest word by center distance (ties go to the earlier word).
  std::size_t attribute(double position) const;

  /// Index of the word strictly containing `position`, if any.
  std::optional<std::size_t> word_at(double position) const;

 private:
  std::string id_;
  std::vector<Word> words_;
};

struct Fixation {
  double position = 0.0;  // characters
  double duration = 0.0;  // milliseconds
};

struct Scanpath {
  std::string reader_id;
  std::string text_id;
  std::vector<Fixation> fixations;
};

/// Throws CorpusError if the scanpath is empty, has a non-positive duration,
/// or leaves the line by more than kPositionMargin.
void validate_scanpath(const Scanpath& scanpath, const TextLine& text);

enum class SaccadeType : int {
  Refixation = 1,
  NextWord = 2,
  ForwardSkip = 3,
  Regression = 4,
};

inline constexpr std::size_t kSaccadeTypeCount = 4;

inline std::size_t type_index(SaccadeType t) {
  return static_cast<std::size_t>(t) - 1;
}
inline SaccadeType type_from_index(std::size_t i) {
  return static_cast<SaccadeType>(static_cast<int>(i) + 1);
}
std::string_view to_string(SaccadeType t);

/// Branch of the refixation mixture: a > 0 is positive, a <= 0 negative.
enum class RefixBranch { Positive, Negative };

inline RefixBranch branch_of(double amplitude) {
  return amplitude > 0.0 ? RefixBranch::Positive : RefixBranch::Negative;
}

/// Closed interval over the extended reals.
struct Interval {
  double left = 0.0;
  double right = 0.0;

  bool contains(double x) const { return left <= x && x <= right; }
};

struct SaccadeEvent {
  SaccadeType type = SaccadeType::NextWord;
  double amplitude = 0.0;
  double duration = 0.0;
  Interval truncation;
  RefixBranch branch = RefixBranch::Positive;  // meaningful for refixations only
};

/// Extents of the currently fixated word and its successor, as seen from a
/// fixation position. The current word is widened to contain the position,
/// which only matters when the fixation sits in an inter-word gap.
struct FixationContext {
  std::size_t current = 0;
  double current_left = 0.0;
  double current_right = 0.0;
  std::optional<Word> next;
};

FixationContext fixation_context(double prev_pos, const TextLine& text);

SaccadeType classify_saccade(double prev_pos, double new_pos, const TextLine& text);

/// Amplitude interval implied by the text for a saccade type starting at
/// `prev_pos`. Throws StructuralInfeasibility for next-word and forward-skip
/// saccades from the last word.
Interval truncation_interval(SaccadeType type, RefixBranch branch, double prev_pos,
                             const TextLine& text);

struct Decomposition {
  Fixation initial;
  std::vector<SaccadeEvent> events;
};

/// Splits a scanpath into its initial fixation and typed saccade events.
Decomposition decompose(const Scanpath& scanpath, const TextLine& text);

/// Coordinate of an initial fixation on its line, measured from the left margin.
inline double initial_coordinate(double position, const TextLine& text) {
  return position - (text.line_begin() - kPositionMargin);
}
inline double position_from_initial_coordinate(double x, const TextLine& text) {
  return x + (text.line_begin() - kPositionMargin);
}

/// Texts plus the scanpaths recorded on them.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<TextLine> texts, std::vector<Scanpath> scanpaths);

  const std::vector<TextLine>& texts() const { return texts_; }
  const std::vector<Scanpath>& scanpaths() const { return scanpaths_; }

  const TextLine& text(std::string_view text_id) const;
  const TextLine* find_text(std::string_view text_id) const;

  /// Reader ids in order of first appearance.
  std::vector<std::string> reader_ids() const;
  std::vector<Scanpath> scanpaths_of(std::string_view reader_id) const;

 private:
  std::vector<TextLine> texts_;
  std::vector<Scanpath> scanpaths_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// JSONL corpus files. Records of kind "text" and "scanpath"; every violation
/// is reported with its line number in a single CorpusError.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
std::string format_corpus(const Corpus& corpus);

}  // namespace gazeid
