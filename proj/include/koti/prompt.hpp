#pragma once

// Prompt construction for the three template insertion methods.
//
//   KOTI   <trim_text_a> <template> <text_b_trim>
//   STI-k  <trim_text_a> <text_b_trim> <template>
//   STI-s  <text_trim> <template>
//
// text_a ends with the first keyword-flagged sentence. Template and special
// tokens are charged against the model capacity before any note token.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "koti/scorer.hpp"
#include "koti/task.hpp"
#include "koti/text.hpp"

namespace koti {

template <class T>
struct TruncatedPair {
  std::vector<T> kept_a;
  std::vector<T> kept_b;
  TruncationRecord record;
};

/// Head-truncates `a` and tail-truncates `b` so that at most `budget` tokens
/// survive, removing from each side in proportion to its length. The share of
/// `a` is rounded half-up and then clamped so neither side goes negative.
template <class T>
TruncatedPair<T> proportional_truncate(std::span<const T> a, std::span<const T> b,
                                       std::size_t budget) {
  const std::size_t len_a = a.size();
  const std::size_t len_b = b.size();
  const std::size_t total = len_a + len_b;

  TruncationRecord rec{0, 0, budget};
  if (total > budget) {
    const std::size_t excess = total - budget;
    // round_half_up(excess * len_a / total) in exact integer arithmetic
    std::size_t head = (2 * excess * len_a + total) / (2 * total);
    const std::size_t lo = excess > len_b ? excess - len_b : 0;
    const std::size_t hi = std::min(excess, len_a);
    head = std::clamp(head, lo, hi);
    rec.removed_head_a = head;
    rec.removed_tail_b = excess - head;
  }

  TruncatedPair<T> out;
  out.kept_a.assign(a.begin() + static_cast<std::ptrdiff_t>(rec.removed_head_a), a.end());
  out.kept_b.assign(b.begin(), b.end() - static_cast<std::ptrdiff_t>(rec.removed_tail_b));
  out.record = rec;
  return out;
}

namespace detail {

struct TemplateTokens {
  TokenSeq tokens;
  std::size_t mask_offset = 0;
};

inline TemplateTokens template_tokens(const TemplateSpec& spec, const Scorer& scorer) {
  const auto& mask = scorer.info().mask_token;
  TemplateTokens out;
  out.tokens = scorer.tokenize(spec.before_mask);
  out.mask_offset = out.tokens.size();
  out.tokens.push_back(mask);
  for (auto& t : scorer.tokenize(spec.after_mask)) out.tokens.push_back(std::move(t));
  if (std::count(out.tokens.begin(), out.tokens.end(), mask) != 1)
    throw TokenizationFailure("template text must not contain the mask token");
  return out;
}

inline TokenSeq note_tokens(std::string_view text, const Scorer& scorer) {
  auto tokens = scorer.tokenize(text);
  const auto& mask = scorer.info().mask_token;
  if (std::find(tokens.begin(), tokens.end(), mask) != tokens.end())
    throw TokenizationFailure("note text tokenizes to the reserved mask token '" +
                              mask + "'");
  return tokens;
}

inline std::size_t note_budget(const Scorer& scorer, std::size_t template_len) {
  const auto& info = scorer.info();
  const std::size_t reserved = info.special_overhead + template_len;
  if (reserved >= info.max_input_tokens)
    throw InputTooLong("template and special tokens exceed model capacity");
  return info.max_input_tokens - reserved;
}

inline void append(TokenSeq& dst, const TokenSeq& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace detail

inline PromptInput build_sti_s(const Note& note, const TaskConfig& task,
                               const Scorer& scorer) {
  const auto tpl = detail::template_tokens(task.prompt_template, scorer);
  const std::size_t budget = detail::note_budget(scorer, tpl.tokens.size());
  auto tokens = detail::note_tokens(note.text, scorer);

  PromptInput p;
  p.method = InsertionMethod::StiS;
  p.truncation.budget = budget;
  if (tokens.size() > budget) {
    p.truncation.removed_tail_b = tokens.size() - budget;
    tokens.resize(budget);
  }
  p.tokens = std::move(tokens);
  p.template_begin = p.tokens.size();
  p.mask_index = p.template_begin + tpl.mask_offset;
  detail::append(p.tokens, tpl.tokens);
  p.template_end = p.tokens.size();
  return p;
}

namespace detail {

inline PromptInput build_keyword_chunk(const Note& note, const TaskConfig& task,
                                       const Scorer& scorer, InsertionMethod method) {
  const auto split = split_at_first_flagged(note.text, task.keywords);
  if (!split) {
    auto p = build_sti_s(note, task, scorer);
    p.method = method;
    p.fallback_used = true;
    return p;
  }

  const auto tpl = template_tokens(task.prompt_template, scorer);
  const std::size_t budget = note_budget(scorer, tpl.tokens.size());
  const auto tokens_a = note_tokens(split->text_a, scorer);
  const auto tokens_b = note_tokens(split->text_b, scorer);
  auto kept = proportional_truncate<Token>(tokens_a, tokens_b, budget);

  PromptInput p;
  p.method = method;
  p.truncation = kept.record;
  p.tokens = std::move(kept.kept_a);
  if (method == InsertionMethod::Koti) {
    p.template_begin = p.tokens.size();
    append(p.tokens, tpl.tokens);
    p.template_end = p.tokens.size();
    append(p.tokens, kept.kept_b);
  } else {
    append(p.tokens, kept.kept_b);
    p.template_begin = p.tokens.size();
    append(p.tokens, tpl.tokens);
    p.template_end = p.tokens.size();
  }
  p.mask_index = p.template_begin + tpl.mask_offset;
  return p;
}

}  // namespace detail

/// Template inserted right after the first keyword-flagged sentence. Notes
/// without a flagged sentence fall back to the STI-s layout with
/// `fallback_used` set.
inline PromptInput build_koti(const Note& note, const TaskConfig& task,
                              const Scorer& scorer) {
  return detail::build_keyword_chunk(note, task, scorer, InsertionMethod::Koti);
}

/// Same kept tokens as KOTI, template appended at the end.
inline PromptInput build_sti_k(const Note& note, const TaskConfig& task,
                               const Scorer& scorer) {
  return detail::build_keyword_chunk(note, task, scorer, InsertionMethod::StiK);
}

inline PromptInput build_prompt(const Note& note, const TaskConfig& task,
                                const Scorer& scorer, InsertionMethod method) {
  switch (method) {
    case InsertionMethod::Koti: return build_koti(note, task, scorer);
    case InsertionMethod::StiK: return build_sti_k(note, task, scorer);
    case InsertionMethod::StiS: return build_sti_s(note, task, scorer);
  }
  throw ConfigError("unknown insertion method");
}

/// The prompt with the template tokens removed; equal across KOTI and STI-k.
inline TokenSeq note_tokens_of(const PromptInput& p) {
  TokenSeq out(p.tokens.begin(), p.tokens.begin() + static_cast<std::ptrdiff_t>(p.template_begin));
  out.insert(out.end(), p.tokens.begin() + static_cast<std::ptrdiff_t>(p.template_end),
             p.tokens.end());
  return out;
}

}  // namespace koti
