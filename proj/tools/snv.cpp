// Copyright 2026 The SNV Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: run, exact, hpo, analyze, gen-stream.

#include <iostream>
#include <limits>
#include <string>

#include "CLI11.hpp"
#include "snv/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Shapley neuron valuation for buffer-free continual learning"};
  app.require_subcommand(1);

  snv::cli::CommonOptions common;
  std::uint64_t seed = 0;
  std::string output;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Root seed (overrides the config)");
    cmd->add_option("--output", output, "Output directory (overrides the config)");
    cmd->add_option("--workers", common.workers, "Maximum worker threads")->check(CLI::PositiveNumber);
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Train a task sequence and write the artifact directory");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  add_common(run);

  std::string game_path;
  snv::cli::ExactOptions exact_opt;
  std::string tau_text = "-inf";
  auto* exact = app.add_subcommand("exact", "Exact Shapley values of a tabulated game");
  exact->add_option("game", game_path, "Game table (`bitmask_hex value` per line)")->required();
  exact->add_flag("--compare", exact_opt.compare, "Also run the estimator and compare");
  exact->add_option("--max-permutations", exact_opt.max_permutations, "Estimator pass budget");
  exact->add_option("--confidence", exact_opt.confidence, "Racing confidence alpha");
  exact->add_option("--capacity", exact_opt.capacity_ratio, "Capacity ratio c");
  exact->add_option("--tau", tau_text, "Truncation threshold (number or -inf)");
  exact->add_flag("--no-racing{false}", exact_opt.racing, "Sample every player on every pass");
  add_common(exact);

  std::string grid_path;
  auto* hpo = app.add_subcommand("hpo", "First-task grid search over lr, c, tau, alpha");
  hpo->add_option("--config", config_path, "Base experiment config (JSON)")->required();
  hpo->add_option("--grid", grid_path, "Grid document (JSON)")->required();
  add_common(hpo);

  std::string artifact_dir;
  auto* analyze = app.add_subcommand("analyze", "Pruning curve, Shapley heatmap and mask overlap of a run");
  analyze->add_option("dir", artifact_dir, "Artifact directory written by `run`")->required();
  add_common(analyze);

  auto* gen = app.add_subcommand("gen-stream", "Write the configured task stream as CSV files");
  gen->add_option("--config", config_path, "Experiment config (JSON)")->required();
  add_common(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : snv::cli::kConfigError;
  }

  for (auto* cmd : {run, exact, hpo, analyze, gen}) {
    if (cmd->count("--seed")) common.seed = seed;
    if (cmd->count("--output")) common.output = output;
  }

  try {
    if (*run) return snv::cli::cmd_run(config_path, common, std::cout, std::cerr);
    if (*exact) {
      exact_opt.seed = common.seed.value_or(0);
      exact_opt.truncation_threshold =
          tau_text == "-inf" ? -std::numeric_limits<double>::infinity() : std::stod(tau_text);
      return snv::cli::cmd_exact(game_path, exact_opt, common.workers, std::cout);
    }
    if (*hpo) return snv::cli::cmd_hpo(config_path, grid_path, common, std::cout);
    if (*analyze) return snv::cli::cmd_analyze(artifact_dir, std::cout);
    if (*gen) return snv::cli::cmd_gen_stream(config_path, common, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid number: " << e.what() << "\n";
    return snv::cli::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return snv::cli::exit_code_for(e);
  }
  return snv::cli::kFailure;
}
