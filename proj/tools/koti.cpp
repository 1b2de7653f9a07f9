// koti: build prompts, evaluate insertion methods, tune, and inspect corpora.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "koti/cli.hpp"

namespace {

void add_common(CLI::App* cmd, koti::cli::CliConfig& cfg, bool needs_data = true) {
  cmd->add_option("--task", cfg.task_path, "Task config (JSON)")->required();
  auto* data = cmd->add_option("--data", cfg.data_path, "Dataset (.jsonl or .csv)");
  if (needs_data) data->required();
  cmd->add_option("--scorer", cfg.scorer, "toy | worker:<command line>")->capture_default_str();
  cmd->add_option("--limit", cfg.limit, "Model input capacity in tokens")->capture_default_str();
  cmd->add_flag("--as-printed", cfg.as_printed,
                "Use the keyword list exactly as originally published");
  cmd->add_flag("-v,--verbose", cfg.verbosity, "Verbose output");
}

void add_eval_options(CLI::App* cmd, koti::cli::CliConfig& cfg) {
  cmd->add_option("--method", cfg.method, "koti | sti-k | sti-s")
      ->capture_default_str()
      ->check(CLI::IsMember({"koti", "sti-k", "sti-s"}));
  cmd->add_option("--plan", cfg.plan, "balanced:<k> | random:<n>")->capture_default_str();
  cmd->add_option("--runs", cfg.runs, "Repetitions")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--seed", cfg.seed, "Base seed; run r uses seed+r")->capture_default_str();
  cmd->add_option("--out", cfg.out_path, "Write the JSON artifact here");
  cmd->add_flag("--macro-binary", cfg.macro_binary,
                "Report macro-F1 instead of affirmative-class F1 for two-class tasks");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyword-optimized template insertion toolkit"};
  app.require_subcommand(1);
  koti::cli::CliConfig cfg;
  koti::cli::GenerateOptions gen;

  auto* build = app.add_subcommand("build", "Render the prompt built for one note");
  add_common(build, cfg);
  build->add_option("--id", cfg.note_id, "Note id")->required();
  build->add_option("--method", cfg.method, "koti | sti-k | sti-s")
      ->capture_default_str()
      ->check(CLI::IsMember({"koti", "sti-k", "sti-s"}));

  auto* eval = app.add_subcommand("eval", "Evaluate one method under a sampling plan");
  add_common(eval, cfg);
  add_eval_options(eval, cfg);
  eval->add_option("--lr", cfg.hp.learning_rate, "Learning rate")->capture_default_str();
  eval->add_option("--batch", cfg.hp.batch_size, "Batch size")->capture_default_str();
  eval->add_option("--epochs", cfg.hp.epochs, "Epochs")->capture_default_str();

  auto* tune = app.add_subcommand("tune", "Random search over learning rate, batch, epochs");
  add_common(tune, cfg);
  add_eval_options(tune, cfg);
  tune->add_option("--trials", cfg.trials, "Number of trials")->capture_default_str()->check(
      CLI::PositiveNumber);

  auto* stats = app.add_subcommand("stats", "Token-length statistics and keyword hit rate");
  add_common(stats, cfg);

  auto* generate = app.add_subcommand("generate", "Write a synthetic corpus");
  generate->add_option("--task", cfg.task_path, "Task config; default dysmenorrhea-shaped");
  generate->add_option("--counts", gen.counts, "Notes per class, comma separated")
      ->delimiter(',');
  generate->add_option("--length", gen.length, "Tokens per note")->capture_default_str();
  generate->add_option("--depth", gen.depth, "Token depth of the salient sentence")
      ->capture_default_str();
  generate->add_option("--distractor-rate", gen.distractor_rate,
                       "Fraction of keyword notes with a later opposite mention")
      ->capture_default_str();
  generate->add_option("--seed", cfg.seed, "Seed")->capture_default_str();
  generate->add_option("--out", cfg.out_path, "Output (.jsonl or .csv); stdout if omitted");
  generate->add_flag("--as-printed", cfg.as_printed, "Use the published keyword list");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) koti::cli::cmd_build(cfg, std::cout);
    else if (eval->parsed()) koti::cli::cmd_eval(cfg, std::cout);
    else if (tune->parsed()) koti::cli::cmd_tune(cfg, std::cout);
    else if (stats->parsed()) koti::cli::cmd_stats(cfg, std::cout);
    else if (generate->parsed()) koti::cli::cmd_generate(cfg, gen, std::cout);
  } catch (const koti::Error& e) {
    std::cerr << "error: " << e.name() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
