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

#ifndef SNV_COMMANDS_HPP
#define SNV_COMMANDS_HPP

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "snv/artifacts.hpp"
#include "snv/config.hpp"
#include "snv/continual.hpp"
#include "snv/error.hpp"
#include "snv/estimator.hpp"
#include "snv/game.hpp"
#include "snv/parallel.hpp"

namespace snv::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kCapacityRefused = 4,
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const PreconditionError*>(&e)) return kConfigError;
  if (dynamic_cast<const CapacityRefused*>(&e)) return kCapacityRefused;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const UndefinedMetric*>(&e) || dynamic_cast<const GameEvaluationError*>(&e))
    return kDataError;
  return kFailure;
}

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::size_t workers = 1;
};

inline ExperimentConfig apply(ExperimentConfig cfg, const CommonOptions& opt) {
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.output) cfg.output_dir = *opt.output;
  return cfg;
}

/// Runs the full sequence and writes the artifact directory.
inline nlohmann::json run(const ExperimentConfig& cfg, std::size_t workers) {
  const auto tasks = load_tasks(cfg);
  WorkerPool pool(workers);
  const auto res = run_sequence(tasks, cfg.continual(), &pool);
  return write_run_artifacts(cfg.output_dir, cfg, res, tasks, workers);
}

inline int cmd_run(const std::string& config_path, const CommonOptions& opt, std::ostream& out,
                   std::ostream& err) {
  const auto cfg = apply(load_config(config_path), opt);
  const auto summary = run(cfg, opt.workers);
  auto num = [](const nlohmann::json& v, double scale = 1.0) {
    return v.is_null() ? std::string("n/a") : fmt::format("{:.4f}", v.get<double>() * scale);
  };
  out << fmt::format("ACC={} BWT={} CAP={}% -> {}\n", num(summary["acc"]), num(summary["bwt"]),
                     num(summary["cap_pct"]), cfg.output_dir);
  for (const auto& w : summary["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
  return kOk;
}

struct ExactOptions {
  bool compare = false;
  std::size_t max_permutations = 20000;
  double confidence = 0.95;
  double capacity_ratio = 0.5;
  double truncation_threshold = -std::numeric_limits<double>::infinity();
  bool racing = true;
  std::uint64_t seed = 0;
};

/// Prints exact Shapley values of a tabulated game; in compare mode also
/// the estimator's values, absolute errors and interval half-widths.
inline int cmd_exact(const std::string& game_path, const ExactOptions& opt, std::size_t workers,
                     std::ostream& out) {
  const auto game = load_game_table(game_path);
  WorkerPool pool(workers);
  const auto exact = exact_shapley(game, &pool);
  if (!opt.compare) {
    out << "player,phi\n";
    for (std::size_t i = 0; i < exact.phi.size(); ++i) out << fmt::format("{},{:.4f}\n", i, exact.phi[i]);
  } else {
    EstimatorConfig cfg;
    cfg.capacity_ratio = opt.capacity_ratio;
    cfg.confidence = opt.confidence;
    cfg.max_permutations = opt.max_permutations;
    cfg.truncation_threshold = opt.truncation_threshold;
    cfg.racing = opt.racing;
    cfg.seed = opt.seed;
    const auto est = estimate_snv(game, cfg, &pool);
    out << "player,phi,phi_hat,abs_error,half_width,n,within\n";
    for (std::size_t i = 0; i < exact.phi.size(); ++i) {
      const double e = std::abs(est.phi_hat[i] - exact.phi[i]);
      const double hw = est.half_width[i];
      out << fmt::format("{},{:.4f},{:.6f},{:.6f},{},{},{}\n", i, exact.phi[i], est.phi_hat[i], e,
                         std::isfinite(hw) ? fmt::format("{:.6f}", hw) : "inf", est.counts[i],
                         e <= hw ? "yes" : "no");
    }
    out << fmt::format("# passes={} converged={} truncated_skips={}\n", est.permutations_used,
                       est.converged ? "true" : "false", est.truncated_skips);
  }
  out << fmt::format("# sum(phi)={:.12g} V(all)-V(empty)={:.12g}\n", exact.total(), exact.grand - exact.baseline);
  return kOk;
}

struct HpoCandidate {
  double lr = 0.0;
  double capacity_ratio = 0.0;
  double truncation_threshold = 0.0;
  double confidence = 0.0;
  double score = 0.0;
};

struct HpoResult {
  std::vector<HpoCandidate> trace;
  std::size_t best = 0;
  ExperimentConfig best_config;
};

/// Validation accuracy on the first task after training it alone.
inline double first_task_score(const ExperimentConfig& cfg, const TaskSpec& first, WorkerPool* pool) {
  const std::vector<TaskSpec> one{first};
  const auto res = run_sequence(one, cfg.continual(), pool);
  const auto val = to_batch(first.val);
  const bool snapshot = cfg.method == Method::snv && cfg.til_mode == TilMode::snapshot;
  const auto pred = snapshot ? til_inference(res.net, res.snapshots, first.task_id, val.inputs)
                             : predict(res.net, val.inputs, nullptr, first.classes);
  return accuracy(pred, val.labels);
}

/// Grid search over {lr, c, tau, alpha}, each candidate scored on the
/// first task only. Grid keys that are absent keep the base value.
inline HpoResult hpo(const ExperimentConfig& base, const nlohmann::json& grid, std::size_t workers) {
  detail::ObjectReader reader(grid, "grid", {"lr", "c", "tau", "alpha"});
  auto axis = [&](const char* key, double fallback) {
    std::vector<double> values;
    if (!reader.has(key)) return std::vector<double>{fallback};
    const auto& a = reader.at(key);
    if (!a.is_array() || a.empty()) throw ConfigError(fmt::format("grid: '{}' must be a non-empty array", key));
    for (const auto& v : a) {
      if (v.is_string() && v.get<std::string>() == "-inf") values.push_back(-std::numeric_limits<double>::infinity());
      else if (v.is_number()) values.push_back(v.get<double>());
      else throw ConfigError(fmt::format("grid: '{}' must contain numbers", key));
    }
    return values;
  };
  if (!grid.is_object() || grid.empty()) throw ConfigError("grid: no hyperparameters to search");
  const auto lrs = axis("lr", base.trainer.lr);
  const auto cs = axis("c", base.estimator.capacity_ratio);
  const auto taus = axis("tau", base.estimator.truncation_threshold);
  const auto alphas = axis("alpha", base.estimator.confidence);

  const auto tasks = load_tasks(base);
  WorkerPool pool(workers);
  HpoResult result;
  double best_score = -1.0;
  for (double lr : lrs)
    for (double c : cs)
      for (double tau : taus)
        for (double alpha : alphas) {
          ExperimentConfig cfg = base;
          cfg.trainer.lr = lr;
          cfg.estimator.capacity_ratio = c;
          cfg.estimator.truncation_threshold = tau;
          cfg.estimator.confidence = alpha;
          cfg.validate();
          const double score = first_task_score(cfg, tasks.front(), &pool);
          result.trace.push_back({lr, c, tau, alpha, score});
          if (score > best_score) {
            best_score = score;
            result.best = result.trace.size() - 1;
            result.best_config = cfg;
          }
        }
  return result;
}

inline std::string hpo_csv(const HpoResult& r) {
  std::string out = "lr,c,tau,alpha,score\n";
  for (const auto& c : r.trace)
    out += fmt::format("{},{},{},{},{}\n", c.lr, c.capacity_ratio, c.truncation_threshold, c.confidence, c.score);
  return out;
}

inline int cmd_hpo(const std::string& config_path, const std::string& grid_path, const CommonOptions& opt,
                   std::ostream& out) {
  const auto base = apply(load_config(config_path), opt);
  nlohmann::json grid;
  try {
    grid = nlohmann::json::parse(read_text(grid_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  const auto result = hpo(base, grid, opt.workers);
  const fs::path dir = base.output_dir;
  write_text(dir / "hpo_trace.csv", hpo_csv(result));
  write_text(dir / "best_config.json", dump_json(to_json(result.best_config)));
  const auto& b = result.trace[result.best];
  out << fmt::format("best: lr={} c={} tau={} alpha={} score={:.4f} ({} candidates) -> {}\n", b.lr,
                     b.capacity_ratio, b.truncation_threshold, b.confidence, b.score, result.trace.size(),
                     (dir / "best_config.json").string());
  return kOk;
}

/// Derived reports of a finished run directory: pruning_curve.csv,
/// shapley_heatmap.csv (task x neuron) and overlap.csv (task x task Jaccard).
inline int cmd_analyze(const std::string& artifact_dir, std::ostream& out) {
  const fs::path dir = artifact_dir;
  if (!fs::exists(dir / "config.echo.json"))
    throw DataError("analyze: missing files in " + dir.string() + ": config.echo.json");
  const auto cfg = parse_config(read_text(dir / "config.echo.json"));
  const auto tasks = load_tasks(cfg);
  const std::size_t t_count = tasks.size();

  std::vector<std::string> missing;
  std::vector<fs::path> phi_files;
  for (std::size_t t = 1; t <= t_count; ++t) phi_files.push_back(dir / fmt::format("phi_task_{}.csv", t));
  const fs::path final_snapshot = dir / "snapshots" / fmt::format("task_{}.json", t_count);
  for (const auto& p : phi_files)
    if (!fs::exists(p)) missing.push_back(p.filename().string());
  if (!fs::exists(dir / "masks.csv")) missing.push_back("masks.csv");
  if (!fs::exists(final_snapshot)) missing.push_back("snapshots/" + final_snapshot.filename().string());
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("analyze: missing files in " + dir.string() + ": " + list);
  }

  DenseNet net;
  try {
    net = densenet_from_json(nlohmann::json::parse(read_text(final_snapshot)).at("network"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("analyze: malformed snapshot: ") + e.what());
  }
  std::vector<std::vector<double>> phis;
  for (const auto& p : phi_files) {
    phis.push_back(parse_phi_csv(read_text(p)));
    if (phis.back().size() != net.n_neurons()) throw DataError("analyze: " + p.filename().string() + " has the wrong length");
  }
  const auto masks = parse_masks_csv(read_text(dir / "masks.csv"));

  const auto pruning = pruning_report(net, tasks, mean_phi(phis), cfg.pruning_fractions);
  write_text(dir / "pruning_curve.csv", pruning_csv(pruning.curve));

  std::string heat = "task";
  for (std::size_t i = 0; i < net.n_neurons(); ++i) {
    const auto id = net.neuron_id(i);
    heat += fmt::format(",l{}_u{}", id.layer, id.unit);
  }
  heat += "\n";
  for (std::size_t t = 0; t < phis.size(); ++t) {
    heat += fmt::format("{}", t + 1);
    for (double v : phis[t]) heat += "," + csv_number(v);
    heat += "\n";
  }
  write_text(dir / "shapley_heatmap.csv", heat);

  std::string overlap = "task";
  for (std::size_t t = 0; t < masks.size(); ++t) overlap += fmt::format(",task_{}", t + 1);
  overlap += "\n";
  const auto jm = jaccard_matrix(masks);
  for (std::size_t i = 0; i < jm.size(); ++i) {
    overlap += fmt::format("{}", i + 1);
    for (double v : jm[i]) overlap += "," + csv_number(v);
    overlap += "\n";
  }
  write_text(dir / "overlap.csv", overlap);
  out << fmt::format("wrote pruning_curve.csv, shapley_heatmap.csv, overlap.csv to {}\n", dir.string());
  return kOk;
}

inline int cmd_gen_stream(const std::string& config_path, const CommonOptions& opt, std::ostream& out) {
  const auto cfg = apply(load_config(config_path), opt);
  const auto tasks = load_tasks(cfg);
  export_stream(tasks, cfg.output_dir);
  out << fmt::format("wrote {} tasks to {}\n", tasks.size(), cfg.output_dir);
  return kOk;
}

}  // namespace snv::cli

#endif  // SNV_COMMANDS_HPP
