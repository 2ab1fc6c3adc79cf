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

#ifndef SNV_ARTIFACTS_HPP
#define SNV_ARTIFACTS_HPP

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "snv/config.hpp"
#include "snv/continual.hpp"
#include "snv/error.hpp"
#include "snv/metrics.hpp"

namespace snv {

namespace fs = std::filesystem;

/// Shortest round-trip decimal; NaN becomes the empty cell.
inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

namespace detail {

inline std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(split_cells(line));
  }
  return rows;
}

inline double parse_cell(const std::string& cell) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw DataError("cannot parse CSV cell '" + cell + "'");
  }
}

}  // namespace detail

/// Header `after_task,task_1..task_T`; missing cells are empty.
inline std::string accuracy_matrix_csv(const AccuracyMatrix& r) {
  std::string out = "after_task";
  for (std::size_t j = 0; j < r.n_tasks(); ++j) out += fmt::format(",task_{}", j + 1);
  out += "\n";
  for (std::size_t i = 0; i < r.n_tasks(); ++i) {
    out += fmt::format("{}", i + 1);
    for (std::size_t j = 0; j < r.n_tasks(); ++j) out += "," + csv_number(r.at(i, j));
    out += "\n";
  }
  return out;
}

inline AccuracyMatrix parse_accuracy_matrix_csv(const std::string& text) {
  const auto rows = detail::read_csv_rows(text);
  if (rows.empty()) throw DataError("accuracy matrix CSV is empty");
  const std::size_t t = rows.front().size() - 1;
  if (rows.size() != t + 1) throw DataError("accuracy matrix CSV is not square");
  AccuracyMatrix r(t);
  for (std::size_t i = 0; i < t; ++i) {
    if (rows[i + 1].size() != t + 1) throw DataError("accuracy matrix CSV row has the wrong width");
    for (std::size_t j = 0; j < t; ++j) {
      const double v = detail::parse_cell(rows[i + 1][j + 1]);
      if (!std::isnan(v)) r.set(i, j, v);
    }
  }
  return r;
}

/// One row per task: `task,neuron_0..neuron_{N-1}` with 0/1 cells.
inline std::string masks_csv(const std::vector<TaskMask>& masks, std::size_t n) {
  std::string out = "task";
  for (std::size_t i = 0; i < n; ++i) out += fmt::format(",neuron_{}", i);
  out += "\n";
  for (const auto& m : masks) {
    out += fmt::format("{}", m.task_id);
    for (auto b : m.bits) out += b ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

inline std::vector<TaskMask> parse_masks_csv(const std::string& text) {
  const auto rows = detail::read_csv_rows(text);
  if (rows.empty()) throw DataError("masks CSV is empty");
  const std::size_t n = rows.front().size() - 1;
  std::vector<TaskMask> masks;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != n + 1) throw DataError("masks CSV row has the wrong width");
    TaskMask m;
    m.task_id = static_cast<int>(detail::parse_cell(rows[r][0]));
    for (std::size_t i = 0; i < n; ++i) m.bits.push_back(rows[r][i + 1] == "1" ? 1 : 0);
    masks.push_back(std::move(m));
  }
  return masks;
}

/// phi_hat column of a phi_task_<t>.csv file.
inline std::vector<double> parse_phi_csv(const std::string& text) {
  const auto rows = detail::read_csv_rows(text);
  std::vector<double> phi;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() < 2) throw DataError("phi CSV row is too short");
    phi.push_back(detail::parse_cell(rows[r][1]));
  }
  return phi;
}

inline nlohmann::json to_json(const TaskSnapshot& s, const DenseNet& checkpoint) {
  nlohmann::json j;
  j["task_id"] = s.task_id;
  j["cumulative_mask"] = s.cumulative.bits;
  j["means"] = s.means;
  j["partition"] = {s.partition.begin, s.partition.end};
  j["head"] = {{"weights", std::vector<double>(s.head.weights.data(), s.head.weights.data() + s.head.weights.size())},
               {"bias", std::vector<double>(s.head.bias.data(), s.head.bias.data() + s.head.bias.size())}};
  j["network"] = to_json(checkpoint);
  return j;
}

/// Neuron-wise ranking for the pruning curve: mean of the per-task phi_hat.
inline std::vector<double> mean_phi(const std::vector<std::vector<double>>& per_task) {
  if (per_task.empty()) return {};
  std::vector<double> phi(per_task.front().size(), 0.0);
  for (const auto& row : per_task)
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += row[i];
  for (auto& v : phi) v /= static_cast<double>(per_task.size());
  return phi;
}

/// Test (and validation) splits of every task pooled together.
struct PooledData {
  LabeledBatch val;
  LabeledBatch test;
};

inline PooledData pool_tasks(const std::vector<TaskSpec>& tasks) {
  std::vector<Sample> val, test;
  for (const auto& t : tasks) {
    val.insert(val.end(), t.val.begin(), t.val.end());
    test.insert(test.end(), t.test.begin(), t.test.end());
  }
  return {to_batch(val), to_batch(test)};
}

struct PruningReport {
  double final_cil_acc = 0.0;
  std::vector<std::pair<double, double>> curve;
};

/// All-class accuracy of `net` on the pooled test data and the pruning
/// curve ranked by `phi`, ablating with means over the pooled validation data.
inline PruningReport pruning_report(const DenseNet& net, const std::vector<TaskSpec>& tasks,
                                    const std::vector<double>& phi, const std::vector<double>& fractions) {
  const auto pooled = pool_tasks(tasks);
  PruningReport rep;
  rep.final_cil_acc = accuracy(cil_inference(net, pooled.test.inputs), pooled.test.labels);
  if (!phi.empty())
    rep.curve = pruning_curve(net, phi, pooled.test, record_means(net, pooled.val.inputs), fractions);
  return rep;
}

inline std::string pruning_csv(const std::vector<std::pair<double, double>>& curve) {
  std::string out = "fraction,accuracy\n";
  for (const auto& [f, a] : curve) out += fmt::format("{},{}\n", f, a);
  return out;
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json scenario_metrics(const AccuracyMatrix& r) {
  nlohmann::json j;
  j["acc"] = acc(r);
  if (r.n_tasks() >= 2) {
    const double b = bwt(r);
    j["bwt"] = b;
    j["bwt_pct"] = 100.0 * b;
  } else {
    j["bwt"] = nullptr;
    j["bwt_pct"] = nullptr;
  }
  return j;
}

}  // namespace detail

/// Writes the full run directory. Everything except meta.json is a pure
/// function of (config, seed).
inline nlohmann::json write_run_artifacts(const fs::path& dir, const ExperimentConfig& cfg,
                                          const RunResult& res, const std::vector<TaskSpec>& tasks,
                                          std::size_t workers) {
  fs::create_directories(dir / "snapshots");
  write_text(dir / "config.echo.json", dump_json(to_json(cfg)));

  const std::size_t t_count = tasks.size();
  if (cfg.scenario == Scenario::both) {
    write_text(dir / "R_til.csv", accuracy_matrix_csv(res.r_til));
    write_text(dir / "R_cil.csv", accuracy_matrix_csv(res.r_cil));
  } else {
    write_text(dir / "R.csv", accuracy_matrix_csv(cfg.scenario == Scenario::til ? res.r_til : res.r_cil));
  }
  write_text(dir / "masks.csv", masks_csv(res.masks, res.net.n_neurons()));

  std::vector<std::vector<double>> phis;
  for (std::size_t t = 0; t < res.reports.size(); ++t) {
    write_text(dir / fmt::format("phi_task_{}.csv", t + 1), estimate_csv(res.reports[t]));
    write_text(dir / fmt::format("estimate_task_{}.json", t + 1), dump_json(to_json(res.reports[t])));
    phis.push_back(res.reports[t].phi_hat);
  }
  for (std::size_t t = 0; t < res.checkpoints.size(); ++t) {
    nlohmann::json snap = t < res.snapshots.size() ? to_json(res.snapshots[t], res.checkpoints[t])
                                                   : nlohmann::json{{"task_id", t + 1}, {"network", to_json(res.checkpoints[t])}};
    write_text(dir / "snapshots" / fmt::format("task_{}.json", t + 1), dump_json(snap));
  }

  const auto pruning = pruning_report(res.net, tasks, mean_phi(phis), cfg.pruning_fractions);

  nlohmann::json summary;
  summary["scenario"] = detail::name_of(cfg.scenario);
  summary["method"] = detail::name_of(cfg.method);
  const auto& primary = cfg.scenario == Scenario::cil ? res.r_cil : res.r_til;
  const auto m = detail::scenario_metrics(primary);
  summary["acc"] = m["acc"];
  summary["bwt"] = m["bwt"];
  summary["bwt_pct"] = m["bwt_pct"];
  summary["til"] = detail::scenario_metrics(res.r_til);
  summary["cil"] = detail::scenario_metrics(res.r_cil);
  summary["cap_pct"] = res.masks.empty() ? nlohmann::json(nullptr) : nlohmann::json(cap(res.masks, res.net));
  summary["jaccard"] = res.masks.empty() ? nlohmann::json::array() : nlohmann::json(jaccard_matrix(res.masks));
  auto& curve = summary["pruning_curve"] = nlohmann::json::array();
  for (const auto& [f, a] : pruning.curve) curve.push_back({f, a});
  summary["final_cil_acc"] = pruning.final_cil_acc;
  summary["n_tasks"] = t_count;
  summary["n_neurons"] = res.net.n_neurons();
  summary["budget_k"] = cfg.method == Method::snv ? nlohmann::json(budget_k(cfg.estimator.capacity_ratio, res.net.n_neurons()))
                                                  : nlohmann::json(nullptr);
  summary["warnings"] = res.warnings;
  write_text(dir / "summary.json", dump_json(summary));

  nlohmann::json meta;
  meta["workers"] = workers;
  meta["seconds_per_task"] = res.seconds;
  double total = 0.0;
  for (double s : res.seconds) total += s;
  meta["seconds_total"] = total;
  meta["written_at_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  write_text(dir / "meta.json", dump_json(meta));
  return summary;
}

}  // namespace snv

#endif  // SNV_ARTIFACTS_HPP
