#pragma once

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coref/cli.hpp"

// Flag surface of the `coref` tool. Every flag can also be set through a
// COREF_<FLAG> environment variable.

namespace coref {

inline int cli_main(int argc, char** argv) {
  CLI::App app{"coreference linking harness: masked tuples, controlled inference, "
               "cluster merging and scoring over CoNLL-U documents"};
  app.require_subcommand(1);
  app.fallthrough();

  CliConfig cfg;
  app.add_option("--instruction", cfg.instruction_id, "instruction set id (1-5)")
      ->envname("COREF_INSTRUCTION")
      ->check(CLI::Range(1, 5));
  app.add_option("--language", cfg.language, "language name substituted into instruction #1")
      ->envname("COREF_LANGUAGE");
  app.add_flag("--zero-suffix", cfg.zero_suffix, "append the zero-mention instruction line")
      ->envname("COREF_ZERO_SUFFIX");
  app.add_option("--frame-budget", cfg.frame_budget, "max frame length")
      ->envname("COREF_FRAME_BUDGET");
  app.add_option("--tuple-budget", cfg.tuple_budget, "max input tuple length")
      ->envname("COREF_TUPLE_BUDGET");
  app.add_option("--length-fn", cfg.length_fn, "length function: words or bytes")
      ->envname("COREF_LENGTH_FN");
  app.add_option("--backend", cfg.backend, "oracle | replay:<file> | remote:<url>")
      ->envname("COREF_BACKEND");
  app.add_option("--retries", cfg.retries, "retries on unusable generations")
      ->envname("COREF_RETRIES");
  app.add_option("--jobs", cfg.jobs, "parallel documents")->envname("COREF_JOBS");
  app.add_option("--seed", cfg.seed, "configuration seed recorded in diagnostics")
      ->envname("COREF_SEED");
  app.add_option("--auth-token", cfg.auth_token, "bearer token for the remote backend")
      ->envname("COREF_AUTH_TOKEN");
  app.add_option("--timeout", cfg.timeout_sec, "remote request timeout in seconds")
      ->envname("COREF_TIMEOUT");

  std::string in_path, out_path, diag_path;
  std::vector<std::string> score_paths;

  CLI::App* export_train = app.add_subcommand(
      "export-train", "write instruction-tuning records (JSONL) from a gold CoNLL-U file");
  export_train->add_option("input", in_path, "CoNLL-U file with gold entities")->required();
  export_train->add_option("--out", out_path, "output records path")
      ->envname("COREF_OUT")
      ->required();

  CLI::App* infer = app.add_subcommand(
      "infer", "fill MASK slots over a CoNLL-U file and write merged entity clusters");
  infer->add_option("input", in_path, "CoNLL-U file with mention spans")->required();
  infer->add_option("--out", out_path, "annotated CoNLL-U output path")
      ->envname("COREF_OUT")
      ->required();
  infer->add_option("--diagnostics", diag_path, "diagnostics output path");

  CLI::App* score = app.add_subcommand("score", "score response files against key files");
  score->add_option("files", score_paths, "<key> <response> file pairs")->required();
  score->add_option("--out", out_path, "machine-readable report path (JSONL)")
      ->envname("COREF_OUT");

  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "infer over the key file, then score the result against it");
  pipeline->add_option("key", in_path, "gold CoNLL-U file")->required();
  pipeline->add_option("--out", out_path, "annotated CoNLL-U output path")->envname("COREF_OUT");
  pipeline->add_option("--diagnostics", diag_path, "diagnostics output path");

  CLI11_PARSE(app, argc, argv);

  if (export_train->parsed()) return cmd_export_train(in_path, out_path, cfg);
  if (infer->parsed()) return cmd_infer(in_path, out_path, diag_path, cfg);
  if (score->parsed()) return cmd_score(score_paths, out_path);
  if (pipeline->parsed()) return cmd_pipeline(in_path, out_path, diag_path, cfg);
  return 1;
}

}  // namespace coref
