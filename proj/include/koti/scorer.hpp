#pragma once

// The masked-LM contract shared by the in-process toy scorer and the
// out-of-process worker client.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "koti/error.hpp"

namespace koti {

using Token = std::string;
using TokenSeq = std::vector<Token>;

enum class InsertionMethod { Koti, StiK, StiS };

inline std::string_view to_string(InsertionMethod m) {
  switch (m) {
    case InsertionMethod::Koti: return "koti";
    case InsertionMethod::StiK: return "sti-k";
    case InsertionMethod::StiS: return "sti-s";
  }
  return "?";
}

inline InsertionMethod parse_method(std::string_view s) {
  if (s == "koti" || s == "KOTI") return InsertionMethod::Koti;
  if (s == "sti-k" || s == "STI-K" || s == "STI-k") return InsertionMethod::StiK;
  if (s == "sti-s" || s == "STI-S" || s == "STI-s") return InsertionMethod::StiS;
  throw ConfigError("unknown insertion method '" + std::string(s) +
                    "' (expected koti, sti-k or sti-s)");
}

struct TruncationRecord {
  std::size_t removed_head_a = 0;
  std::size_t removed_tail_b = 0;
  std::size_t budget = 0;

  friend bool operator==(const TruncationRecord&, const TruncationRecord&) = default;
};

/// A complete model input. Special tokens are not materialised; they are
/// charged through `ScorerInfo::special_overhead`.
struct PromptInput {
  TokenSeq tokens;
  std::size_t mask_index = 0;
  InsertionMethod method = InsertionMethod::StiS;
  TruncationRecord truncation;
  bool fallback_used = false;
  // [template_begin, template_end) locates the template tokens, mask included.
  std::size_t template_begin = 0;
  std::size_t template_end = 0;

  friend bool operator==(const PromptInput&, const PromptInput&) = default;
};

struct ScorerInfo {
  std::size_t max_input_tokens = 512;
  std::size_t special_overhead = 2;
  std::string mask_token = "[MASK]";
};

struct TrainExample {
  PromptInput prompt;
  std::size_t gold_class_index = 0;
};

struct HyperParams {
  double learning_rate = 1e-5;
  int batch_size = 1;
  int epochs = 1;

  void validate() const {
    if (!(learning_rate >= 1e-7 && learning_rate <= 1e-4))
      throw InvalidHyperParams("learning rate must lie in [1e-7, 1e-4]");
    if (batch_size != 1 && batch_size != 2 && batch_size != 4)
      throw InvalidHyperParams("batch size must be one of 1, 2, 4");
    if (epochs < 1 || epochs > 10)
      throw InvalidHyperParams("epochs must lie in 1..10");
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Pluggable masked language model.
///
/// `tokenize`, `detokenize`, `score` and `info` may be called concurrently on
/// an unchanging model. `train` and `reset` mutate state and must not overlap
/// any other call.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual const ScorerInfo& info() const = 0;
  virtual TokenSeq tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const Token> tokens) const = 0;

  /// One logit per label word, read at the prompt's mask position.
  virtual std::vector<double> score(const PromptInput& prompt,
                                    std::span<const Token> label_words) const = 0;

  /// Fine-tunes on `examples`; gold indices refer to `label_words`.
  /// Returns the final mean training loss.
  virtual double train(std::span<const TrainExample> examples,
                       std::span<const Token> label_words,
                       const HyperParams& hp, std::uint64_t seed) = 0;

  /// Restores the post-handshake model state.
  virtual void reset() = 0;

  /// Stable description used in report fingerprints.
  virtual std::string describe() const = 0;
};

/// Checks a prompt against the scorer's declared capacity and mask rule.
inline void check_prompt(const PromptInput& prompt, const ScorerInfo& info) {
  if (prompt.tokens.size() + info.special_overhead > info.max_input_tokens)
    throw InputTooLong("prompt has " + std::to_string(prompt.tokens.size()) +
                       " tokens plus " + std::to_string(info.special_overhead) +
                       " special tokens; capacity is " +
                       std::to_string(info.max_input_tokens));
  std::size_t masks = 0;
  for (const auto& t : prompt.tokens)
    if (t == info.mask_token) ++masks;
  if (masks != 1 || prompt.mask_index >= prompt.tokens.size() ||
      prompt.tokens[prompt.mask_index] != info.mask_token)
    throw MalformedPrompt("prompt must contain exactly one mask token at mask_index");
}

}  // namespace koti
