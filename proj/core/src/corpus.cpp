#include "gazeid/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gazeid/errors.hpp"

namespace gazeid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string where(std::string_view text_id) {
  return "text '" + std::string(text_id) + "'";
}

}  // namespace

TextLine::TextLine(std::string text_id, std::vector<Word> words)
    : id_(std::move(text_id)), words_(std::move(words)) {
  if (words_.empty()) throw CorpusError(where(id_) + " has no words");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const Word& w = words_[i];
    if (!std::isfinite(w.left) || !std::isfinite(w.right) || !(w.left < w.right)) {
      throw CorpusError(where(id_) + ": word " + std::to_string(i) +
                        " must satisfy left < right");
    }
    if (i > 0 && !(words_[i - 1].right < w.left)) {
      throw CorpusError(where(id_) + ": words " + std::to_string(i - 1) + " and " +
                        std::to_string(i) + " overlap or are out of order");
    }
  }
}

std::optional<std::size_t> TextLine::word_at(double position) const {
  auto it = std::lower_bound(words_.begin(), words_.end(), position,
                             [](const Word& w, double x) { return w.right < x; });
  if (it != words_.end() && it->contains(position)) {
    return static_cast<std::size_t>(it - words_.begin());
  }
  return std::nullopt;
}

std::size_t TextLine::attribute(double position) const {
  if (!std::isfinite(position)) {
    throw CorpusError(where(id_) + ": non-finite fixation position");
  }
  if (auto hit = word_at(position)) return *hit;
  // Outside every word: the nearest center lies on one of the two flanking words.
  auto it = std::lower_bound(words_.begin(), words_.end(), position,
                             [](const Word& w, double x) { return w.right < x; });
  if (it == words_.begin()) return 0;
  if (it == words_.end()) return words_.size() - 1;
  const std::size_t after = static_cast<std::size_t>(it - words_.begin());
  const std::size_t before = after - 1;
  const double d_before = std::abs(position - words_[before].center());
  const double d_after = std::abs(position - words_[after].center());
  return d_after < d_before ? after : before;
}

void validate_scanpath(const Scanpath& scanpath, const TextLine& text) {
  if (scanpath.fixations.empty()) {
    throw CorpusError("scanpath of reader '" + scanpath.reader_id + "' on " +
                      where(text.id()) + " has no fixations");
  }
  const double lo = text.line_begin() - kPositionMargin;
  const double hi = text.line_end() + kPositionMargin;
  for (std::size_t i = 0; i < scanpath.fixations.size(); ++i) {
    const Fixation& f = scanpath.fixations[i];
    if (!(f.duration > 0.0) || !std::isfinite(f.duration)) {
      throw CorpusError("fixation " + std::to_string(i) + " of reader '" +
                        scanpath.reader_id + "' has non-positive duration");
    }
    if (!(f.position >= lo && f.position <= hi)) {
      throw CorpusError("fixation " + std::to_string(i) + " of reader '" +
                        scanpath.reader_id + "' lies outside " + where(text.id()));
    }
  }
}

std::string_view to_string(SaccadeType t) {
  switch (t) {
    case SaccadeType::Refixation: return "refixation";
    case SaccadeType::NextWord: return "next_word";
    case SaccadeType::ForwardSkip: return "forward_skip";
    case SaccadeType::Regression: return "regression";
  }
  return "unknown";
}

FixationContext fixation_context(double prev_pos, const TextLine& text) {
  FixationContext ctx;
  ctx.current = text.attribute(prev_pos);
  const Word& w = text.word(ctx.current);
  ctx.current_left = std::min(w.left, prev_pos);
  ctx.current_right = std::max(w.right, prev_pos);
  if (ctx.current + 1 < text.size()) ctx.next = text.word(ctx.current + 1);
  return ctx;
}

namespace {

SaccadeType classify_in_context(const FixationContext& ctx, double new_pos,
                                const TextLine& text) {
  if (new_pos < ctx.current_left) return SaccadeType::Regression;
  if (new_pos <= ctx.current_right) return SaccadeType::Refixation;
  if (!ctx.next) return SaccadeType::Refixation;  // beyond the last word
  if (new_pos > ctx.next->right) return SaccadeType::ForwardSkip;
  if (new_pos >= ctx.next->left) return SaccadeType::NextWord;
  // Gap between the current and the next word.
  const double d_cur = std::abs(new_pos - text.word(ctx.current).center());
  const double d_next = std::abs(new_pos - ctx.next->center());
  return d_next < d_cur ? SaccadeType::NextWord : SaccadeType::Refixation;
}

Interval interval_in_context(const FixationContext& ctx, SaccadeType type,
                             RefixBranch branch, double prev_pos,
                             const TextLine& text) {
  switch (type) {
    case SaccadeType::Refixation:
      if (branch == RefixBranch::Positive) return {0.0, ctx.current_right - prev_pos};
      return {ctx.current_left - prev_pos, 0.0};
    case SaccadeType::NextWord:
    case SaccadeType::ForwardSkip:
      if (!ctx.next) {
        throw StructuralInfeasibility(std::string(to_string(type)) +
                                      " saccade from the last word of " +
                                      where(text.id()));
      }
      if (type == SaccadeType::NextWord) {
        return {ctx.next->left - prev_pos, ctx.next->right - prev_pos};
      }
      return {ctx.next->right - prev_pos, kInf};
    case SaccadeType::Regression:
      return {-kInf, ctx.current_left - prev_pos};
  }
  throw DomainError("unknown saccade type");
}

}  // namespace

SaccadeType classify_saccade(double prev_pos, double new_pos, const TextLine& text) {
  if (!std::isfinite(new_pos)) {
    throw CorpusError(where(text.id()) + ": non-finite fixation position");
  }
  return classify_in_context(fixation_context(prev_pos, text), new_pos, text);
}

Interval truncation_interval(SaccadeType type, RefixBranch branch, double prev_pos,
                             const TextLine& text) {
  return interval_in_context(fixation_context(prev_pos, text), type, branch,
                             prev_pos, text);
}

Decomposition decompose(const Scanpath& scanpath, const TextLine& text) {
  if (scanpath.text_id != text.id()) {
    throw CorpusError("scanpath references text '" + scanpath.text_id +
                      "' but was paired with " + where(text.id()));
  }
  validate_scanpath(scanpath, text);
  Decomposition out;
  out.initial = scanpath.fixations.front();
  out.events.reserve(scanpath.fixations.size() - 1);
  for (std::size_t t = 1; t < scanpath.fixations.size(); ++t) {
    const double prev = scanpath.fixations[t - 1].position;
    const double next = scanpath.fixations[t].position;
    try {
      const FixationContext ctx = fixation_context(prev, text);
      SaccadeEvent ev;
      ev.type = classify_in_context(ctx, next, text);
      ev.amplitude = next - prev;
      ev.duration = scanpath.fixations[t].duration;
      ev.branch = branch_of(ev.amplitude);
      ev.truncation = interval_in_context(ctx, ev.type, ev.branch, prev, text);
      // Landings in the gap after the current word are attributed to a word
      // without lying on it; stretch the interval to the landing point.
      if (ev.type == SaccadeType::Refixation && ev.branch == RefixBranch::Positive) {
        ev.truncation.right = std::max(ev.truncation.right, ev.amplitude);
      } else if (ev.type == SaccadeType::NextWord) {
        ev.truncation.left = std::min(ev.truncation.left, ev.amplitude);
      }
      if (!(ev.truncation.left < ev.truncation.right)) {
        throw CorpusError(ev.amplitude == 0.0
                              ? "zero-length saccade from the left edge of a word has an empty "
                                "truncation interval"
                              : "degenerate truncation interval");
      }
      out.events.push_back(ev);
    } catch (const Error& e) {
      throw CorpusError("fixation " + std::to_string(t) + " of reader '" +
                        scanpath.reader_id + "' on " + where(text.id()) + ": " +
                        e.what());
    }
  }
  return out;
}

Corpus::Corpus(std::vector<TextLine> texts, std::vector<Scanpath> scanpaths)
    : texts_(std::move(texts)), scanpaths_(std::move(scanpaths)) {
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    if (!index_.emplace(texts_[i].id(), i).second) {
      throw CorpusError("duplicate " + where(texts_[i].id()));
    }
  }
  for (const Scanpath& sp : scanpaths_) {
    validate_scanpath(sp, text(sp.text_id));
  }
}

const TextLine* Corpus::find_text(std::string_view text_id) const {
  auto it = index_.find(std::string(text_id));
  return it == index_.end() ? nullptr : &texts_[it->second];
}

const TextLine& Corpus::text(std::string_view text_id) const {
  if (const TextLine* t = find_text(text_id)) return *t;
  throw CorpusError("unknown " + where(text_id));
}

std::vector<std::string> Corpus::reader_ids() const {
  std::vector<std::string> ids;
  for (const Scanpath& sp : scanpaths_) {
    if (std::find(ids.begin(), ids.end(), sp.reader_id) == ids.end()) {
      ids.push_back(sp.reader_id);
    }
  }
  return ids;
}

std::vector<Scanpath> Corpus::scanpaths_of(std::string_view reader_id) const {
  std::vector<Scanpath> out;
  for (const Scanpath& sp : scanpaths_) {
    if (sp.reader_id == reader_id) out.push_back(sp);
  }
  return out;
}

}  // namespace gazeid
