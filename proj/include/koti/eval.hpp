#pragma once

// Zero-shot / few-shot evaluation protocol and hyper-parameter random search.
//
// For run r = 0..runs-1: reset the scorer, split with seed base+r, fine-tune
// on the train part (skipped when it is empty), predict every eval note and
// score the run. Diverged and degenerate runs are kept in the report and
// mark the aggregate as partial.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koti/error.hpp"
#include "koti/metrics.hpp"
#include "koti/prompt.hpp"
#include "koti/sampling.hpp"
#include "koti/scorer.hpp"
#include "koti/task.hpp"
#include "koti/verbalizer.hpp"

namespace koti {

/// Headline metric for two-class tasks: F1 of the affirmative class
/// (Positive) or macro-F1 over both classes (Macro).
enum class BinaryMetric { Positive, Macro };

struct EvalOptions {
  BinaryMetric binary_metric = BinaryMetric::Positive;
};

enum class RunStatus { Ok, Diverged, Degenerate };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::Degenerate: return "degenerate";
  }
  return "?";
}

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Ok;
  std::string failure;
  std::size_t train_size = 0;
  std::size_t eval_size = 0;
  std::optional<double> train_loss;
  Confusion confusion{0};
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;
  double primary_metric = 0.0;
  std::size_t prompts_built = 0;
  std::size_t fallback_prompts = 0;
};

struct EvalReport {
  std::string task;
  InsertionMethod method = InsertionMethod::Koti;
  SamplingPlan plan;
  HyperParams hp;
  std::vector<std::string> classes;
  std::string primary_metric_name;
  std::vector<RunResult> runs;
  std::optional<double> mean;  // over successful runs
  double std_error = 0.0;        // sample sd / sqrt(successful runs)
  std::size_t successful_runs = 0;
  bool partial = false;
  double fallback_rate = 0.0;
  std::string fingerprint;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h ^ 0xff;  // field separator
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string fingerprint(const TaskConfig& task, std::span<const Note> dataset,
                               const Scorer& scorer, InsertionMethod method,
                               const SamplingPlan& plan, const HyperParams& hp,
                               const EvalOptions& opts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, to_json(task).dump());
  h = fnv1a(h, scorer.describe());
  h = fnv1a(h, to_string(method));
  h = fnv1a(h, plan.to_string() + "/" + std::to_string(plan.runs) + "/" +
                   std::to_string(plan.seed));
  h = fnv1a(h, nlohmann::json{hp.learning_rate, hp.batch_size, hp.epochs}.dump());
  h = fnv1a(h, opts.binary_metric == BinaryMetric::Positive ? "positive" : "macro");
  for (const auto& n : dataset) {
    h = fnv1a(h, n.id);
    h = fnv1a(h, n.label.value_or(""));
    h = fnv1a(h, n.text);
  }
  return hex64(h);
}

inline std::size_t gold_index(const TaskConfig& task, const Note& note) {
  if (!note.label) throw UnknownLabel("note '" + note.id + "' has no label");
  const auto c = task.class_index(*note.label);
  if (!c)
    throw UnknownLabel("note '" + note.id + "' has label '" + *note.label +
                       "' which is not a class of task '" + task.name + "'");
  return *c;
}

}  // namespace detail

/// Predicted class for one note.
inline Prediction classify(const Note& note, const TaskConfig& task, const Scorer& scorer,
                           InsertionMethod method, std::span<const Token> label_words,
                           bool* fallback = nullptr) {
  const auto prompt = build_prompt(note, task, scorer, method);
  if (fallback) *fallback = prompt.fallback_used;
  const auto logits = scorer.score(prompt, label_words);
  return predict(logits);
}

inline EvalReport evaluate(const TaskConfig& task, std::span<const Note> dataset,
                           InsertionMethod method, Scorer& scorer, const SamplingPlan& plan,
                           const HyperParams& hp, const EvalOptions& opts = {}) {
  if (plan.runs < 1) throw ConfigError("runs must be at least 1");
  std::vector<std::size_t> gold(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) gold[i] = detail::gold_index(task, dataset[i]);
  if (!plan.zero_shot()) hp.validate();

  const auto label_words = resolve_label_words(task, scorer);
  const bool binary = task.classes.size() == 2;

  EvalReport report;
  report.task = task.name;
  report.method = method;
  report.plan = plan;
  report.hp = hp;
  report.classes = task.classes;
  report.primary_metric_name =
      binary && opts.binary_metric == BinaryMetric::Positive
          ? "f1:" + task.classes[task.affirmative_class]
          : "macro_f1";
  report.fingerprint = detail::fingerprint(task, dataset, scorer, method, plan, hp, opts);

  std::size_t prompts = 0, fallbacks = 0;
  for (std::size_t r = 0; r < plan.runs; ++r) {
    RunResult run;
    run.run = r;
    run.seed = plan.seed + r;
    run.confusion = Confusion(task.classes.size());

    scorer.reset();
    const auto split = sample(dataset, task, plan, run.seed);
    run.train_size = split.train.size();
    run.eval_size = split.eval.size();

    if (!split.train.empty()) {
      std::vector<TrainExample> examples;
      examples.reserve(split.train.size());
      for (auto i : split.train) {
        auto p = build_prompt(dataset[i], task, scorer, method);
        ++run.prompts_built;
        if (p.fallback_used) ++run.fallback_prompts;
        examples.push_back({std::move(p), gold[i]});
      }
      try {
        run.train_loss = scorer.train(examples, label_words, hp, run.seed);
      } catch (const DivergenceDetected& e) {
        run.status = RunStatus::Diverged;
        run.failure = e.what();
      }
    }

    if (run.status == RunStatus::Ok) {
      for (auto i : split.eval) {
        bool fb = false;
        const auto pred = classify(dataset[i], task, scorer, method, label_words, &fb);
        ++run.prompts_built;
        if (fb) ++run.fallback_prompts;
        run.confusion.add(gold[i], pred.class_index);
      }
      if (split.eval.empty()) {
        run.status = RunStatus::Degenerate;
        run.failure = "evaluation set is empty";
      } else {
        run.per_class = per_class_metrics(run.confusion);
        run.macro_f1 = macro_f1(run.confusion);
        run.primary_metric = binary && opts.binary_metric == BinaryMetric::Positive
                                 ? run.per_class[task.affirmative_class].f1
                                 : run.macro_f1;
      }
    }
    prompts += run.prompts_built;
    fallbacks += run.fallback_prompts;
    report.runs.push_back(std::move(run));
  }

  std::vector<double> values;
  for (const auto& run : report.runs)
    if (run.status == RunStatus::Ok) values.push_back(run.primary_metric);
  report.successful_runs = values.size();
  report.partial = values.size() != report.runs.size();
  if (!values.empty()) {
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    report.mean = mean;
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
      report.std_error = sd / std::sqrt(static_cast<double>(values.size()));
    }
  }
  report.fallback_rate =
      prompts == 0 ? 0.0 : static_cast<double>(fallbacks) / static_cast<double>(prompts);
  return report;
}

struct TrialResult {
  HyperParams hp;
  std::optional<double> mean;
  double std_error = 0.0;
  std::size_t failed_runs = 0;
};

struct SearchResult {
  HyperParams best;
  std::size_t best_trial = 0;
  std::vector<TrialResult> trials;
};

/// Draws `trials` settings (lr ~ Uniform[1e-7, 1e-4], batch in {1,2,4},
/// epochs in 1..10), evaluates each under `plan`, and keeps the highest mean
/// primary metric; ties go to the lower learning rate. Trials with no
/// successful run cannot win.
inline SearchResult random_search(const TaskConfig& task, std::span<const Note> dataset,
                                  InsertionMethod method, Scorer& scorer,
                                  const SamplingPlan& plan, std::size_t trials,
                                  std::uint64_t seed, const EvalOptions& opts = {}) {
  if (trials < 1) throw ConfigError("random search needs at least one trial");
  std::mt19937_64 rng(seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  constexpr int batches[] = {1, 2, 4};

  SearchResult out;
  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < trials; ++t) {
    TrialResult trial;
    trial.hp.learning_rate = 1e-7 + (1e-4 - 1e-7) * unit();
    trial.hp.batch_size = batches[detail::uniform_index(rng, 3)];
    trial.hp.epochs = 1 + static_cast<int>(detail::uniform_index(rng, 10));

    const auto report = evaluate(task, dataset, method, scorer, plan, trial.hp, opts);
    trial.mean = report.mean;
    trial.std_error = report.std_error;
    trial.failed_runs = report.runs.size() - report.successful_runs;

    if (trial.mean) {
      if (!best) {
        best = t;
      } else {
        const auto& cur = out.trials[*best];
        if (*trial.mean > *cur.mean ||
            (*trial.mean == *cur.mean && trial.hp.learning_rate < cur.hp.learning_rate))
          best = t;
      }
    }
    out.trials.push_back(trial);
  }
  if (!best) throw AllTrialsFailed("no trial completed a successful run");
  out.best_trial = *best;
  out.best = out.trials[*best].hp;
  return out;
}

inline nlohmann::json to_json(const HyperParams& hp) {
  return {{"learning_rate", hp.learning_rate},
          {"batch_size", hp.batch_size},
          {"epochs", hp.epochs}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json j{{"run", run.run},
                     {"seed", run.seed},
                     {"status", to_string(run.status)},
                     {"train_size", run.train_size},
                     {"eval_size", run.eval_size},
                     {"prompts_built", run.prompts_built},
                     {"fallback_prompts", run.fallback_prompts}};
    if (!run.failure.empty()) j["failure"] = run.failure;
    j["train_loss"] = run.train_loss ? nlohmann::json(*run.train_loss) : nlohmann::json();
    if (run.status == RunStatus::Ok) {
      nlohmann::json cm = nlohmann::json::array();
      for (std::size_t g = 0; g < run.confusion.classes(); ++g) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t p = 0; p < run.confusion.classes(); ++p)
          row.push_back(run.confusion.at(g, p));
        cm.push_back(std::move(row));
      }
      j["confusion"] = std::move(cm);
      nlohmann::json pc = nlohmann::json::object();
      for (std::size_t c = 0; c < run.per_class.size(); ++c) {
        const auto& m = run.per_class[c];
        pc[r.classes[c]] = {{"precision", m.precision},
                            {"recall", m.recall},
                            {"f1", m.f1},
                            {"support", m.support},
                            {"predicted", m.predicted}};
      }
      j["per_class"] = std::move(pc);
      j["macro_f1"] = run.macro_f1;
      j["primary_metric"] = run.primary_metric;
    }
    runs.push_back(std::move(j));
  }

  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& run : r.runs) seeds.push_back(run.seed);

  return {
      {"task", r.task},
      {"method", std::string(to_string(r.method))},
      {"plan",
       {{"mode", r.plan.mode == SamplingMode::Balanced ? "balanced" : "random"},
        {"count", r.plan.count},
        {"runs", r.plan.runs},
        {"base_seed", r.plan.seed},
        {"seeds", std::move(seeds)}}},
      {"hyper_params", to_json(r.hp)},
      {"classes", r.classes},
      {"primary_metric", r.primary_metric_name},
      {"aggregate",
       {{"mean", r.mean ? nlohmann::json(*r.mean) : nlohmann::json()},
        {"stderr", r.std_error},
        {"successful_runs", r.successful_runs},
        {"partial", r.partial}}},
      {"fallback_rate", r.fallback_rate},
      {"config_fingerprint", r.fingerprint},
      {"runs", std::move(runs)},
  };
}

inline nlohmann::json to_json(const SearchResult& s) {
  nlohmann::json trials = nlohmann::json::array();
  for (std::size_t i = 0; i < s.trials.size(); ++i) {
    const auto& t = s.trials[i];
    trials.push_back({{"trial", i},
                      {"hyper_params", to_json(t.hp)},
                      {"mean", t.mean ? nlohmann::json(*t.mean) : nlohmann::json()},
                      {"stderr", t.std_error},
                      {"failed_runs", t.failed_runs}});
  }
  return {{"best_trial", s.best_trial}, {"best", to_json(s.best)}, {"trials", std::move(trials)}};
}

}  // namespace koti
