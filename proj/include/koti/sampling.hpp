#pragma once

// Few-shot train/eval splits. Every split is a pure function of its inputs
// and seed; the shuffle uses mt19937_64 output directly so results do not
// depend on the standard library's distribution implementations.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "koti/error.hpp"
#include "koti/task.hpp"
#include "koti/text.hpp"

namespace koti {

enum class SamplingMode { Balanced, Random };

struct SamplingPlan {
  SamplingMode mode = SamplingMode::Balanced;
  std::size_t count = 0;  // k per class (balanced) or n total (random)
  std::size_t runs = 10;
  std::uint64_t seed = 0;

  bool zero_shot() const { return count == 0; }

  /// Parses "balanced:<k>" or "random:<n>".
  static SamplingPlan parse(std::string_view text, std::size_t runs = 10,
                            std::uint64_t seed = 0) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos)
      throw ConfigError("plan must be balanced:<k> or random:<n>");
    const auto mode = text.substr(0, colon);
    const auto num = std::string(text.substr(colon + 1));
    SamplingPlan plan;
    if (mode == "balanced") plan.mode = SamplingMode::Balanced;
    else if (mode == "random") plan.mode = SamplingMode::Random;
    else throw ConfigError("unknown sampling mode '" + std::string(mode) + "'");
    if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("plan count must be a non-negative integer");
    plan.count = std::stoull(num);
    if (runs < 1) throw ConfigError("runs must be at least 1");
    plan.runs = runs;
    plan.seed = seed;
    return plan;
  }

  std::string to_string() const {
    return std::string(mode == SamplingMode::Balanced ? "balanced:" : "random:") +
           std::to_string(count);
  }
};

/// Indices into the dataset. `train` keeps draw order; `eval` keeps dataset
/// order.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

namespace detail {

// Unbiased draw from [0, n) by rejection.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t v;
  do v = rng(); while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

// First `take` elements of a seeded Fisher-Yates shuffle of `pool`.
inline std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t take,
                                     std::mt19937_64& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

inline Split complete(std::vector<std::size_t> train, std::size_t size) {
  std::vector<bool> used(size, false);
  for (auto i : train) used[i] = true;
  Split s{std::move(train), {}};
  for (std::size_t i = 0; i < size; ++i)
    if (!used[i]) s.eval.push_back(i);
  return s;
}

}  // namespace detail

/// Exactly `k` notes per task class, drawn without replacement.
inline Split sample_balanced(std::span<const Note> dataset, const TaskConfig& task,
                             std::size_t k, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(task.classes.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& label = dataset[i].label;
    if (!label) throw UnknownLabel("note '" + dataset[i].id + "' has no label");
    const auto c = task.class_index(*label);
    if (!c) throw UnknownLabel("note '" + dataset[i].id + "' has label '" + *label +
                               "' which is not a class of task '" + task.name + "'");
    by_class[*c].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < k)
      throw InsufficientClassExamples("class '" + task.classes[c] + "' has " +
                                      std::to_string(by_class[c].size()) +
                                      " labeled examples, " + std::to_string(k) + " needed");
    for (auto i : detail::draw(by_class[c], k, rng)) train.push_back(i);
  }
  return detail::complete(std::move(train), dataset.size());
}

/// `n` notes drawn uniformly without replacement, ignoring labels.
inline Split sample_random(std::span<const Note> dataset, std::size_t n, std::uint64_t seed) {
  if (n > dataset.size())
    throw SampleTooLarge("cannot draw " + std::to_string(n) + " notes from " +
                         std::to_string(dataset.size()));
  std::vector<std::size_t> pool(dataset.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  std::mt19937_64 rng(seed);
  return detail::complete(detail::draw(std::move(pool), n, rng), dataset.size());
}

inline Split sample(std::span<const Note> dataset, const TaskConfig& task,
                    const SamplingPlan& plan, std::uint64_t seed) {
  return plan.mode == SamplingMode::Balanced ? sample_balanced(dataset, task, plan.count, seed)
                                             : sample_random(dataset, plan.count, seed);
}

}  // namespace koti
