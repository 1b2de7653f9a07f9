#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "koti/error.hpp"
#include "koti/scorer.hpp"
#include "koti/task.hpp"

namespace koti {

struct Prediction {
  std::size_t class_index = 0;
  std::vector<double> probabilities;
};

/// Maps each label word to the token read at the mask. Multi-token words use
/// their first sub-token and a warning is written to `warnings`.
inline TokenSeq resolve_label_words(const TaskConfig& task, const Scorer& scorer,
                                    std::ostream* warnings = nullptr) {
  TokenSeq ids;
  ids.reserve(task.label_words.size());
  for (const auto& word : task.label_words) {
    const auto pieces = scorer.tokenize(word);
    if (pieces.empty())
      throw TokenizationFailure("label word '" + word + "' produced no tokens");
    if (pieces.size() > 1 && warnings)
      *warnings << "warning: label word '" << word << "' splits into "
                << pieces.size() << " tokens; using first sub-token '"
                << pieces.front() << "'\n";
    ids.push_back(pieces.front());
  }
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      if (ids[i] == ids[j])
        throw LabelWordCollision("classes '" + task.classes[i] + "' and '" +
                                 task.classes[j] + "' both resolve to token '" +
                                 ids[i] + "'");
  return ids;
}

/// Max-shifted softmax over label-word logits; ties go to the lowest index.
inline Prediction predict(std::span<const double> logits) {
  if (logits.empty()) throw NonFiniteLogit("no logits to verbalize");
  for (double v : logits)
    if (!std::isfinite(v)) throw NonFiniteLogit("label-word logit is not finite");

  const double top = *std::max_element(logits.begin(), logits.end());
  Prediction out;
  out.probabilities.reserve(logits.size());
  double z = 0.0;
  for (double v : logits) {
    out.probabilities.push_back(std::exp(v - top));
    z += out.probabilities.back();
  }
  for (auto& p : out.probabilities) p /= z;

  // argmax on logits, not probabilities: exact ties stay exact
  out.class_index = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[out.class_index]) out.class_index = i;
  return out;
}

}  // namespace koti
