#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "koti/error.hpp"
#include "koti/scorer.hpp"
#include "koti/task.hpp"
#include "koti/text.hpp"

namespace koti {

/// Inference runs needed to cover `tokens` with non-overlapping windows of
/// `limit` tokens; at least one.
inline std::size_t chunk_runs(std::size_t tokens, std::size_t limit) {
  if (limit == 0) throw ConfigError("chunk limit must be positive");
  return tokens <= limit ? 1 : (tokens + limit - 1) / limit;
}

struct DatasetStats {
  std::size_t notes = 0;
  double mean_tokens = 0.0;
  double sd_tokens = 0.0;  // population standard deviation
  double proportion_over_limit = 0.0;
  double mean_chunk_runs = 0.0;
  double keyword_hit_rate = 0.0;
  std::size_t limit = 0;
};

/// Token-length distribution of a corpus in the scorer's token space plus the
/// fraction of notes with at least one keyword-flagged sentence.
inline DatasetStats compute_stats(std::span<const Note> dataset, const TaskConfig& task,
                                  const Scorer& scorer, std::size_t limit = 512) {
  DatasetStats s;
  s.limit = limit;
  s.notes = dataset.size();
  if (dataset.empty()) return s;
  if (limit == 0) throw ConfigError("chunk limit must be positive");

  // integer accumulators keep the result independent of note order
  unsigned __int128 sum = 0, sum_sq = 0;
  std::size_t runs = 0, over = 0, hits = 0;
  for (const auto& note : dataset) {
    const std::size_t n = scorer.tokenize(note.text).size();
    sum += n;
    sum_sq += static_cast<unsigned __int128>(n) * n;
    runs += chunk_runs(n, limit);
    if (n > limit) ++over;
    if (split_at_first_flagged(note.text, task.keywords)) ++hits;
  }
  const auto count = static_cast<unsigned __int128>(dataset.size());
  const double c = static_cast<double>(dataset.size());
  s.mean_tokens = static_cast<double>(sum) / c;
  // population variance = (N * sum_sq - sum^2) / N^2
  const auto numer = count * sum_sq - sum * sum;
  s.sd_tokens = std::sqrt(static_cast<double>(numer) / (c * c));
  s.proportion_over_limit = static_cast<double>(over) / c;
  s.mean_chunk_runs = static_cast<double>(runs) / c;
  s.keyword_hit_rate = static_cast<double>(hits) / c;
  return s;
}

}  // namespace koti
