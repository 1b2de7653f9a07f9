#pragma once

// Command implementations behind the `koti` executable. Each command takes a
// parsed configuration and writes human-readable output to `console`; the
// machine-readable artifact (report, dataset) goes to `out_path` when set.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koti/dataset.hpp"
#include "koti/error.hpp"
#include "koti/eval.hpp"
#include "koti/prompt.hpp"
#include "koti/stats.hpp"
#include "koti/synthetic.hpp"
#include "koti/task.hpp"
#include "koti/toy_scorer.hpp"
#include "koti/worker_scorer.hpp"

namespace koti::cli {

struct CliConfig {
  std::filesystem::path task_path;
  std::filesystem::path data_path;
  std::string method = "koti";
  std::string scorer = "toy";  // "toy" or "worker:<command line>"
  std::string plan = "balanced:0";
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  std::size_t limit = 512;
  std::filesystem::path out_path;
  bool as_printed = false;
  int verbosity = 0;
  HyperParams hp{1e-4, 1, 10};
  std::size_t trials = 10;
  std::string note_id;
  bool macro_binary = false;
};

inline std::unique_ptr<Scorer> make_scorer(const std::string& selector, const TaskConfig& task,
                                           std::size_t limit) {
  if (selector == "toy") {
    ToyScorerConfig cfg;
    cfg.max_input_tokens = limit;
    return std::make_unique<ToyScorer>(task, cfg);
  }
  constexpr std::string_view prefix = "worker:";
  if (selector.rfind(prefix, 0) == 0 && selector.size() > prefix.size())
    return std::make_unique<WorkerScorer>(selector.substr(prefix.size()));
  throw ConfigError("scorer must be 'toy' or 'worker:<command line>'");
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

/// The prompt as the scorer sees it, template bracketed in the token stream.
inline std::string render_prompt(const PromptInput& p, const Scorer& scorer) {
  std::ostringstream os;
  if (p.fallback_used)
    os << "*** FALLBACK: no keyword-flagged sentence; template appended at the end ***\n";
  const std::span<const Token> all(p.tokens);
  const auto before = all.subspan(0, p.template_begin);
  const auto tpl = all.subspan(p.template_begin, p.template_end - p.template_begin);
  const auto after = all.subspan(p.template_end);
  os << scorer.detokenize(before);
  if (!before.empty()) os << ' ';
  os << "<<< " << scorer.detokenize(tpl) << " >>>";
  if (!after.empty()) os << ' ' << scorer.detokenize(after);
  os << "\n\n";
  os << "method:          " << to_string(p.method) << '\n'
     << "tokens:          " << p.tokens.size() << " (+" << scorer.info().special_overhead
     << " special, capacity " << scorer.info().max_input_tokens << ")\n"
     << "mask index:      " << p.mask_index << '\n'
     << "template span:   [" << p.template_begin << ", " << p.template_end << ")\n"
     << "truncation:      removed_head_a=" << p.truncation.removed_head_a
     << " removed_tail_b=" << p.truncation.removed_tail_b
     << " budget=" << p.truncation.budget << '\n'
     << "fallback:        " << (p.fallback_used ? "yes" : "no") << '\n';
  return os.str();
}

inline void cmd_build(const CliConfig& cfg, std::ostream& console) {
  const auto task = load_task_config(cfg.task_path, cfg.as_printed);
  const auto notes = load_dataset(cfg.data_path);
  const auto& note = find_note(notes, cfg.note_id);
  const auto scorer = make_scorer(cfg.scorer, task, cfg.limit);
  const auto prompt = build_prompt(note, task, *scorer, parse_method(cfg.method));
  console << render_prompt(prompt, *scorer);
}

inline std::string format_report_summary(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << r.task << " / " << to_string(r.method) << " / " << r.plan.to_string() << " x"
     << r.plan.runs << " runs\n";
  for (const auto& run : r.runs) {
    os << "  run " << std::setw(2) << run.run << "  seed " << run.seed << "  train "
       << run.train_size << "  eval " << run.eval_size << "  ";
    if (run.status == RunStatus::Ok)
      os << r.primary_metric_name << " " << run.primary_metric;
    else
      os << to_string(run.status) << ": " << run.failure;
    os << '\n';
  }
  os << "  mean " << r.primary_metric_name << ": ";
  if (r.mean) os << *r.mean << " +/- " << r.std_error << " (stderr)";
  else os << "n/a";
  if (r.partial) os << "  [PARTIAL: " << r.successful_runs << "/" << r.runs.size() << " runs]";
  os << "\n  fallback rate: " << r.fallback_rate << '\n';
  return os.str();
}

inline EvalOptions eval_options(const CliConfig& cfg) {
  return {cfg.macro_binary ? BinaryMetric::Macro : BinaryMetric::Positive};
}

inline nlohmann::json cmd_eval(const CliConfig& cfg, std::ostream& console) {
  const auto task = load_task_config(cfg.task_path, cfg.as_printed);
  const auto notes = load_dataset(cfg.data_path);
  auto scorer = make_scorer(cfg.scorer, task, cfg.limit);
  const auto plan = SamplingPlan::parse(cfg.plan, cfg.runs, cfg.seed);
  const auto report =
      evaluate(task, notes, parse_method(cfg.method), *scorer, plan, cfg.hp, eval_options(cfg));
  auto j = to_json(report);
  if (!cfg.out_path.empty()) write_text_file(cfg.out_path, j.dump(2) + "\n");
  console << format_report_summary(report);
  return j;
}

inline nlohmann::json cmd_tune(const CliConfig& cfg, std::ostream& console) {
  const auto task = load_task_config(cfg.task_path, cfg.as_printed);
  const auto notes = load_dataset(cfg.data_path);
  auto scorer = make_scorer(cfg.scorer, task, cfg.limit);
  const auto plan = SamplingPlan::parse(cfg.plan, cfg.runs, cfg.seed);
  const auto result = random_search(task, notes, parse_method(cfg.method), *scorer, plan,
                                    cfg.trials, cfg.seed, eval_options(cfg));
  auto j = to_json(result);
  if (!cfg.out_path.empty()) write_text_file(cfg.out_path, j.dump(2) + "\n");

  console << "trial  learning_rate  batch  epochs  mean        stderr   failed\n";
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const auto& t = result.trials[i];
    console << std::setw(5) << i << "  " << std::scientific << std::setprecision(3)
            << std::setw(13) << t.hp.learning_rate << "  " << std::setw(5) << t.hp.batch_size
            << "  " << std::setw(6) << t.hp.epochs << "  " << std::fixed << std::setprecision(4);
    if (t.mean) console << std::setw(10) << *t.mean;
    else console << std::setw(10) << "n/a";
    console << "  " << std::setw(7) << t.std_error << "  " << std::setw(6) << t.failed_runs
            << (i == result.best_trial ? "  <- best" : "") << '\n';
  }
  return j;
}

inline DatasetStats cmd_stats(const CliConfig& cfg, std::ostream& console) {
  const auto task = load_task_config(cfg.task_path, cfg.as_printed);
  const auto notes = load_dataset(cfg.data_path);
  const auto scorer = make_scorer(cfg.scorer, task, cfg.limit);
  const auto s = compute_stats(notes, task, *scorer, cfg.limit);
  console << std::fixed << std::setprecision(3)
          << "notes                                   " << s.notes << '\n'
          << "average tokens per note                 " << s.mean_tokens << '\n'
          << "SD (population)                         " << s.sd_tokens << '\n'
          << std::left << std::setw(40)
          << ("proportion of notes with > " + std::to_string(s.limit) + " tokens") << std::right
          << s.proportion_over_limit << '\n'
          << "estimated inference runs per note       " << s.mean_chunk_runs << '\n'
          << "keyword hit rate                        " << s.keyword_hit_rate << '\n';
  return s;
}

struct GenerateOptions {
  std::vector<std::size_t> counts;  // aligned with task classes; empty = defaults
  std::size_t length = 1000;
  std::size_t depth = 600;
  double distractor_rate = 0.0;
};

/// Synthetic spec for a task: the affirmative class gets affirmative
/// mentions, the negative class negated ones, every other class none.
inline SyntheticSpec synthetic_spec_for(const TaskConfig& task, const GenerateOptions& g,
                                        std::uint64_t seed) {
  SyntheticSpec spec;
  spec.keywords = task.keywords.patterns();
  spec.note_tokens = g.length;
  spec.salient_depth = g.depth;
  spec.distractor_rate = g.distractor_rate;
  spec.seed = seed;
  if (!g.counts.empty() && g.counts.size() != task.classes.size())
    throw InvalidSpec("--counts needs one count per class (" +
                      std::to_string(task.classes.size()) + ")");
  const auto defaults = dysmenorrhea_shaped_spec();
  for (std::size_t c = 0; c < task.classes.size(); ++c) {
    EvidenceRole role = EvidenceRole::Absent;
    if (c == task.affirmative_class) role = EvidenceRole::Affirmative;
    else if (c == task.negative_class) role = EvidenceRole::Negated;
    std::size_t count = 50;
    if (!g.counts.empty()) count = g.counts[c];
    else if (task.classes.size() == defaults.classes.size()) count = defaults.classes[c].count;
    spec.classes.push_back({task.classes[c], role, count});
  }
  return spec;
}

inline std::vector<Note> cmd_generate(const CliConfig& cfg, const GenerateOptions& g,
                                      std::ostream& console) {
  SyntheticSpec spec;
  if (cfg.task_path.empty()) {
    spec = dysmenorrhea_shaped_spec(cfg.seed);
    spec.note_tokens = g.length;
    spec.salient_depth = g.depth;
    spec.distractor_rate = g.distractor_rate;
    if (!g.counts.empty()) {
      if (g.counts.size() != spec.classes.size())
        throw InvalidSpec("--counts needs one count per class (3)");
      for (std::size_t c = 0; c < g.counts.size(); ++c) spec.classes[c].count = g.counts[c];
    }
  } else {
    spec = synthetic_spec_for(load_task_config(cfg.task_path, cfg.as_printed), g, cfg.seed);
  }
  const auto notes = generate_synthetic(spec);
  if (cfg.out_path.empty()) {
    write_jsonl(console, notes);
  } else {
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + cfg.out_path.string());
    if (format_from_path(cfg.out_path) == DataFormat::Csv) write_csv(out, notes);
    else write_jsonl(out, notes);
    console << "wrote " << notes.size() << " notes to " << cfg.out_path.string() << '\n';
  }
  return notes;
}

}  // namespace koti::cli
