#pragma once

#include <cstddef>
#include <vector>

#include "koti/error.hpp"

namespace koti {

/// Square confusion matrix, rows = gold class, columns = predicted class.
class Confusion {
 public:
  explicit Confusion(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

  void add(std::size_t gold, std::size_t predicted) { ++counts_[gold * n_ + predicted]; }

  std::size_t at(std::size_t gold, std::size_t predicted) const {
    return counts_[gold * n_ + predicted];
  }
  std::size_t& at(std::size_t gold, std::size_t predicted) { return counts_[gold * n_ + predicted]; }

  std::size_t classes() const { return n_; }

  std::size_t total() const {
    std::size_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::size_t gold_count(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += at(c, p);
    return s;
  }
  std::size_t predicted_count(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t g = 0; g < n_; ++g) s += at(g, c);
    return s;
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
};

/// Precision/recall/F1 from counts. Undefined ratios (zero denominators) are 0.
inline ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.support = tp + fn;
  m.predicted = tp + fp;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  if (tp + fp > 0) m.precision = d(tp) / d(tp + fp);
  if (tp + fn > 0) m.recall = d(tp) / d(tp + fn);
  if (2 * tp + fp + fn > 0) m.f1 = 2.0 * d(tp) / d(2 * tp + fp + fn);
  return m;
}

inline std::vector<ClassMetrics> per_class_metrics(const Confusion& cm) {
  std::vector<ClassMetrics> out;
  out.reserve(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const std::size_t tp = cm.at(c, c);
    out.push_back(class_metrics(tp, cm.predicted_count(c) - tp, cm.gold_count(c) - tp));
  }
  return out;
}

/// Unweighted mean of per-class F1. Classes absent from both gold and
/// predictions are left out of the mean; a class with gold examples but no
/// predictions counts with F1 = 0.
inline double macro_f1(const Confusion& cm) {
  if (cm.total() == 0) throw EmptyEvaluation("confusion matrix is empty");
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& m : per_class_metrics(cm)) {
    if (m.support == 0 && m.predicted == 0) continue;
    sum += m.f1;
    ++counted;
  }
  return sum / static_cast<double>(counted);
}

}  // namespace koti
