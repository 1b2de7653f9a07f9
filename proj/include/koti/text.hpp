#pragma once

// Sentence segmentation and keyword flagging for clinical notes.
//
// Offsets are byte offsets into the UTF-8 note text. Only ASCII bytes are
// treated as whitespace, punctuation or case-foldable; every byte >= 0x80 is
// a word character, so multi-byte code points are never split.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "koti/error.hpp"

namespace koti {

struct Note {
  std::string id;
  std::string text;
  std::optional<std::string> label;

  friend bool operator==(const Note&, const Note&) = default;
};

struct SentenceSpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  bool flagged = false;

  friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_terminator(char c) {
  return c == '.' || c == '!' || c == '?' || c == ';';
}

inline char to_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), to_lower);
  return out;
}

// Lowercases, trims and collapses internal whitespace runs to one space.
inline std::string normalize_pattern(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(to_lower(c));
  }
  return out;
}

// Length of the match of `pattern` at `pos`, or nullopt. A space in the
// pattern matches any non-empty whitespace run in the text.
inline std::optional<std::size_t> match_at(std::string_view text,
                                           std::size_t pos,
                                           std::string_view pattern) {
  std::size_t i = pos;
  for (char p : pattern) {
    if (p == ' ') {
      if (i >= text.size() || !is_space(text[i])) return std::nullopt;
      while (i < text.size() && is_space(text[i])) ++i;
      continue;
    }
    if (i >= text.size() || to_lower(text[i]) != p) return std::nullopt;
    ++i;
  }
  return i - pos;
}

}  // namespace detail

/// Lowercased keyword patterns for one task. Matching is a word-boundary
/// anchored prefix match, so "osteo" matches "osteoporosis" but "cards" does
/// not match "discards".
class KeywordSet {
 public:
  explicit KeywordSet(const std::vector<std::string>& patterns) {
    if (patterns.empty()) throw InvalidKeyword("keyword set must not be empty");
    std::unordered_set<std::string> seen;
    for (const auto& raw : patterns) {
      auto p = detail::normalize_pattern(raw);
      if (p.empty()) throw InvalidKeyword("empty keyword pattern");
      if (!seen.insert(p).second)
        throw InvalidKeyword("duplicate keyword pattern '" + p + "'");
      patterns_.push_back(std::move(p));
    }
  }

  const std::vector<std::string>& patterns() const noexcept { return patterns_; }

  /// True iff some pattern occurs in `text` starting at a word boundary.
  bool matches(std::string_view text) const {
    for (std::size_t pos = 0; pos < text.size(); ++pos) {
      if (pos > 0 && detail::is_word_char(text[pos - 1])) continue;
      if (!detail::is_word_char(text[pos])) continue;
      for (const auto& p : patterns_)
        if (detail::match_at(text, pos, p)) return true;
    }
    return false;
  }

 private:
  std::vector<std::string> patterns_;
};

/// Splits at `.`, `!`, `?` or `;` followed by whitespace and at every line
/// break. Spans are trimmed of surrounding whitespace; whitespace-only
/// fragments yield no span.
inline std::vector<SentenceSpan> segment_sentences(std::string_view text) {
  std::vector<SentenceSpan> spans;
  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && detail::is_space(text[b])) ++b;
    while (e > b && detail::is_space(text[e - 1])) --e;
    if (b < e) spans.push_back({b, e, false});
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      emit(start, i);
      start = i + 1;
    } else if (detail::is_terminator(c) && i + 1 < text.size() &&
               detail::is_space(text[i + 1])) {
      emit(start, i + 1);
      start = i + 1;
    }
  }
  emit(start, text.size());
  return spans;
}

inline std::vector<SentenceSpan> flag_sentences(std::string_view text,
                                                std::vector<SentenceSpan> spans,
                                                const KeywordSet& keywords) {
  for (auto& s : spans)
    s.flagged = keywords.matches(text.substr(s.start, s.end - s.start));
  return spans;
}

struct SplitText {
  std::string text_a;
  std::string text_b;
};

/// Splits the note right after its first keyword-flagged sentence.
/// `text_a + text_b` is always byte-identical to `text`.
inline std::optional<SplitText> split_at_first_flagged(
    std::string_view text, const KeywordSet& keywords) {
  for (const auto& s : segment_sentences(text)) {
    if (keywords.matches(text.substr(s.start, s.end - s.start)))
      return SplitText{std::string(text.substr(0, s.end)),
                       std::string(text.substr(s.end))};
  }
  return std::nullopt;
}

}  // namespace koti
