#pragma once

// Synthetic clinical-style corpus with a controllable salient sentence.
//
// Every note has exactly `note_tokens` tokens under the toy tokenizer. Notes
// of an affirmative class carry "patient reports <keyword>." starting at
// token `salient_depth`; negated classes carry "patient denies <keyword>.";
// absent classes carry no keyword at all. The rest is filler drawn from a
// neutral vocabulary. With `distractor_rate` > 0, that fraction of
// keyword-bearing notes also gets an opposite-polarity mention placed
// `distractor_gap_min..max` tokens after the salient sentence, which only
// the first mention's position disambiguates.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "koti/error.hpp"
#include "koti/sampling.hpp"
#include "koti/text.hpp"
#include "koti/toy_scorer.hpp"

namespace koti {

enum class EvidenceRole { Affirmative, Negated, Absent };

struct SyntheticClass {
  std::string label;
  EvidenceRole role = EvidenceRole::Absent;
  std::size_t count = 0;
};

struct SyntheticSpec {
  std::vector<SyntheticClass> classes;
  std::vector<std::string> keywords;
  std::size_t note_tokens = 1000;
  std::size_t salient_depth = 600;
  double distractor_rate = 0.0;
  std::size_t distractor_gap_min = 40;
  std::size_t distractor_gap_max = 150;
  std::uint64_t seed = 0;
  std::string id_prefix = "syn";
};

/// Yes/No/Unknown in the 34/52/64 proportions of the dysmenorrhea training split.
inline SyntheticSpec dysmenorrhea_shaped_spec(std::uint64_t seed = 0) {
  SyntheticSpec spec;
  spec.classes = {{"Yes", EvidenceRole::Affirmative, 34},
                  {"No", EvidenceRole::Negated, 52},
                  {"Unknown", EvidenceRole::Absent, 64}};
  spec.keywords = {"dysmenorrhea", "cramps", "menstrual pain", "period pain"};
  spec.seed = seed;
  return spec;
}

inline const std::vector<std::string>& neutral_vocabulary() {
  static const std::vector<std::string> words = {
      "patient", "presents", "for",       "routine",  "visit",     "vitals",   "stable",
      "exam",    "within",   "normal",    "limits",   "follow",    "up",       "in",
      "clinic",  "blood",    "pressure",  "heart",    "rate",      "regular",  "lungs",
      "clear",   "abdomen",  "soft",      "plan",     "continue",  "current",  "medications",
      "labs",    "reviewed", "weight",    "today",    "discussed", "diet",     "exercise",
      "counseling", "provided", "return", "weeks",    "history",   "annual",   "screening",
      "performed", "results", "pending",  "allergies", "reconciled", "skin",   "intact",
      "mild",    "fatigue",  "sleep",     "adequate", "hydration", "encouraged", "the",
      "and",     "with",     "was",       "is",       "will",      "be",       "scheduled"};
  return words;
}

namespace detail {

struct NoteBuilder {
  std::mt19937_64& rng;
  const std::vector<std::string>& vocab;
  std::vector<std::string> sentences;

  const std::string& word() { return vocab[uniform_index(rng, vocab.size())]; }

  // Appends filler sentences totalling exactly `tokens` tokens.
  void filler(std::size_t tokens) {
    while (tokens > 0) {
      if (tokens == 1) {  // a bare word; it joins the following sentence
        sentences.push_back(word());
        return;
      }
      std::size_t len = tokens <= 14 ? tokens : 6 + uniform_index(rng, 9);
      if (tokens - len == 1) --len;
      std::string s;
      for (std::size_t i = 0; i + 1 < len; ++i) {
        if (!s.empty()) s += ' ';
        s += word();
      }
      s += '.';
      sentences.push_back(std::move(s));
      tokens -= len;
    }
  }

  std::string text() const {
    std::string out;
    for (const auto& s : sentences) {
      if (!out.empty()) out += ' ';
      out += s;
    }
    return out;
  }
};

}  // namespace detail

inline std::vector<Note> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.note_tokens == 0) throw InvalidSpec("note length must be positive");
  if (spec.salient_depth >= spec.note_tokens)
    throw InvalidSpec("salient depth must be below the note length");
  if (!(spec.distractor_rate >= 0.0 && spec.distractor_rate <= 1.0))
    throw InvalidSpec("distractor rate must lie in [0, 1]");
  if (spec.distractor_gap_min > spec.distractor_gap_max)
    throw InvalidSpec("distractor gap range is empty");

  bool needs_keywords = false;
  for (const auto& c : spec.classes) {
    if (c.label.empty()) throw InvalidSpec("class labels must be non-empty");
    needs_keywords |= c.role != EvidenceRole::Absent && c.count > 0;
  }
  if (needs_keywords && spec.keywords.empty())
    throw InvalidSpec("keyword-bearing classes need at least one keyword");

  const ToyTokenizer tokenizer("[MASK]");
  std::vector<std::string> vocab;
  if (spec.keywords.empty()) {
    vocab = neutral_vocabulary();
  } else {
    const KeywordSet keywords(spec.keywords);
    for (const auto& w : neutral_vocabulary()) {
      bool clash = keywords.matches(w);
      for (const auto& p : keywords.patterns())
        clash |= p.substr(0, p.find(' ')) == w;
      if (!clash) vocab.push_back(w);
    }
  }
  if (vocab.empty()) throw InvalidSpec("keywords exclude the whole filler vocabulary");

  std::vector<std::size_t> keyword_len;
  for (const auto& k : spec.keywords) {
    const auto n = tokenizer.tokenize(k).size();
    if (n == 0) throw InvalidSpec("keyword '" + k + "' has no tokens");
    keyword_len.push_back(n);
  }

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < spec.classes.size(); ++c)
    order.insert(order.end(), spec.classes[c].count, c);
  std::mt19937_64 rng(spec.seed);
  {
    auto shuffled = detail::draw(order, order.size(), rng);
    order = std::move(shuffled);
  }

  const std::size_t width = std::to_string(order.size()).size();
  std::vector<Note> notes;
  notes.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& cls = spec.classes[order[i]];
    detail::NoteBuilder b{rng, vocab, {}};

    if (cls.role == EvidenceRole::Absent) {
      b.filler(spec.note_tokens);
    } else {
      const std::size_t kw = detail::uniform_index(rng, spec.keywords.size());
      const std::size_t salient_len = 3 + keyword_len[kw];  // patient <verb> <kw> .
      if (spec.salient_depth + salient_len > spec.note_tokens)
        throw InvalidSpec("salient sentence does not fit after the given depth");
      const bool affirmative = cls.role == EvidenceRole::Affirmative;
      const auto mention = [&](bool positive, std::size_t k) {
        return std::string("patient ") + (positive ? "reports " : "denies ") +
               detail::normalize_pattern(spec.keywords[k]) + ".";
      };

      b.filler(spec.salient_depth);
      b.sentences.push_back(mention(affirmative, kw));
      std::size_t remaining = spec.note_tokens - spec.salient_depth - salient_len;

      const double coin = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (coin < spec.distractor_rate) {
        const std::size_t dk = detail::uniform_index(rng, spec.keywords.size());
        const std::size_t gap =
            spec.distractor_gap_min +
            detail::uniform_index(rng, spec.distractor_gap_max - spec.distractor_gap_min + 1);
        const std::size_t dlen = 3 + keyword_len[dk];
        if (gap + dlen <= remaining) {
          b.filler(gap);
          b.sentences.push_back(mention(!affirmative, dk));
          remaining -= gap + dlen;
        }
      }
      b.filler(remaining);
    }

    std::string id = std::to_string(i);
    id.insert(0, width - id.size(), '0');
    notes.push_back({spec.id_prefix + "-" + id, b.text(), cls.label});
  }
  return notes;
}

}  // namespace koti
