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

#ifndef SNV_TASKS_HPP
#define SNV_TASKS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "snv/error.hpp"
#include "snv/network.hpp"
#include "snv/rng.hpp"

namespace snv {

/// One labelled example. `id` is stable across reorderings of a dataset
/// and keys the split shuffle.
struct Sample {
  std::uint64_t id = 0;
  std::vector<double> x;
  std::size_t label = 0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct TaskSpec {
  int task_id = 0;  // 1-based
  ClassRange classes;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct StreamConfig {
  std::size_t n_tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t input_dim = 8;
  std::size_t samples_per_class = 100;
  double blob_spread = 1.0;
  double class_separation = 4.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_tasks == 0 || classes_per_task == 0 || input_dim == 0 || samples_per_class == 0)
      throw ConfigError("stream counts must all be positive");
    if (!(class_separation > 0.0)) throw ConfigError("stream.class_separation must be > 0");
    if (!(blob_spread >= 0.0)) throw ConfigError("stream.blob_spread must be >= 0");
  }
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct SplitResult {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  std::vector<std::string> warnings;
};

/// Stratified, seeded split. Within each class the samples are ordered by id
/// and then shuffled, so membership does not depend on input order. Class
/// counts are rounded to the nearest sample; the test split takes the rest.
inline SplitResult split(const std::vector<Sample>& data, SplitFractions f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw PreconditionError("split: fractions must be non-negative and sum to 1");
  std::map<std::size_t, std::vector<Sample>> by_class;
  for (const auto& s : data) by_class[s.label].push_back(s);

  SplitResult out;
  for (auto& [label, samples] : by_class) {
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    CounterRng rng(derive_seed(seed, "split-class", label));
    shuffle(std::span<Sample>(samples), rng);
    const auto n = samples.size();
    const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n))));
    const auto n_val = std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n))));
    const std::array<std::pair<const char*, double>, 3> parts{{{"train", f.train}, {"val", f.val}, {"test", f.test}}};
    const std::array<std::size_t, 3> got{n_train, n_val, n - n_train - n_val};
    for (std::size_t p = 0; p < 3; ++p) {
      if (parts[p].second > 0 && got[p] == 0)
        out.warnings.push_back(fmt::format("class {} has {} samples; the {} split received none",
                                           label, n, parts[p].first));
    }
    auto it = samples.begin();
    out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(n_train));
    it += static_cast<std::ptrdiff_t>(n_train);
    out.val.insert(out.val.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    out.test.insert(out.test.end(), it, samples.end());
  }
  return out;
}

/// Class centres of the blob stream, indexed by global class id: uniform
/// on the sphere of radius class_separation.
inline std::vector<std::vector<double>> blob_centers(const StreamConfig& cfg) {
  cfg.validate();
  CounterRng rng(derive_seed(cfg.seed, "centers"));
  std::vector<std::vector<double>> centers(cfg.n_tasks * cfg.classes_per_task);
  for (auto& centre : centers) {
    centre.resize(cfg.input_dim);
    double norm = 0.0;
    while (norm < 1e-12) {
      for (auto& v : centre) v = rng.normal();
      norm = std::sqrt(std::inner_product(centre.begin(), centre.end(), centre.begin(), 0.0));
    }
    for (auto& v : centre) v *= cfg.class_separation / norm;
  }
  return centers;
}

/// Gaussian-blob class-incremental stream. Task t owns global classes
/// [t*C, (t+1)*C); samples add isotropic noise of std blob_spread to the
/// class centre.
inline std::vector<TaskSpec> make_stream(const StreamConfig& cfg) {
  const auto centers = blob_centers(cfg);
  CounterRng rng(derive_seed(cfg.seed, "blobs"));
  std::vector<TaskSpec> tasks;
  std::uint64_t next_id = 0;
  for (std::size_t t = 0; t < cfg.n_tasks; ++t) {
    std::vector<Sample> data;
    const std::size_t first = t * cfg.classes_per_task;
    for (std::size_t c = 0; c < cfg.classes_per_task; ++c) {
      const auto& centre = centers[first + c];
      for (std::size_t k = 0; k < cfg.samples_per_class; ++k) {
        Sample s;
        s.id = next_id++;
        s.label = first + c;
        s.x.resize(cfg.input_dim);
        for (std::size_t d = 0; d < cfg.input_dim; ++d) s.x[d] = centre[d] + cfg.blob_spread * rng.normal();
        data.push_back(std::move(s));
      }
    }
    auto parts = split(data, SplitFractions{}, derive_seed(cfg.seed, "split", t));
    TaskSpec task;
    task.task_id = static_cast<int>(t + 1);
    task.classes = {first, first + cfg.classes_per_task};
    task.train = std::move(parts.train);
    task.val = std::move(parts.val);
    task.test = std::move(parts.test);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

inline LabeledBatch to_batch(const std::vector<Sample>& samples) {
  LabeledBatch b;
  if (samples.empty()) return b;
  const auto d = static_cast<Eigen::Index>(samples.front().x.size());
  b.inputs.resize(d, static_cast<Eigen::Index>(samples.size()));
  b.labels.reserve(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (static_cast<Eigen::Index>(samples[j].x.size()) != d)
      throw DataError("samples have inconsistent input dimension");
    for (Eigen::Index r = 0; r < d; ++r) b.inputs(r, static_cast<Eigen::Index>(j)) = samples[j].x[static_cast<std::size_t>(r)];
    b.labels.push_back(samples[j].label);
  }
  return b;
}

namespace detail {

inline std::string samples_csv(const std::vector<Sample>& samples, std::size_t dim) {
  std::string out;
  for (std::size_t d = 0; d < dim; ++d) out += fmt::format("x_{},", d);
  out += "label\n";
  for (const auto& s : samples) {
    for (double v : s.x) out += fmt::format("{},", v);
    out += fmt::format("{}\n", s.label);
  }
  return out;
}

inline std::vector<Sample> read_samples_csv(const std::filesystem::path& path, std::uint64_t& next_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw DataError(path.string() + ": need at least one feature and a label");
  std::vector<Sample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream fields(line);
    std::string cell;
    Sample s;
    s.id = next_id++;
    std::size_t col = 0;
    try {
      while (std::getline(fields, cell, ',')) {
        if (col + 1 < columns) s.x.push_back(std::stod(cell));
        else s.label = static_cast<std::size_t>(std::stoull(cell));
        ++col;
      }
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: cannot parse row", path.string(), line_no));
    }
    if (col != columns) throw DataError(fmt::format("{}:{}: expected {} columns", path.string(), line_no, columns));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

/// Writes t<k>_<split>.csv (k 1-based) for every task.
inline void export_stream(const std::vector<TaskSpec>& tasks, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : tasks) {
    const std::size_t dim = !t.train.empty() ? t.train.front().x.size() : 0;
    const std::pair<const char*, const std::vector<Sample>*> parts[] = {
        {"train", &t.train}, {"val", &t.val}, {"test", &t.test}};
    for (const auto& [name, samples] : parts) {
      std::ofstream out(dir / fmt::format("t{}_{}.csv", t.task_id, name), std::ios::binary);
      out << detail::samples_csv(*samples, dim);
    }
  }
}

/// Reads a directory written by export_stream (or prepared externally).
/// Each task's class range spans the labels it contains.
inline std::vector<TaskSpec> import_stream(const std::filesystem::path& dir) {
  std::vector<TaskSpec> tasks;
  std::uint64_t next_id = 0;
  for (int k = 1;; ++k) {
    const auto train = dir / fmt::format("t{}_train.csv", k);
    if (!std::filesystem::exists(train)) break;
    TaskSpec t;
    t.task_id = k;
    t.train = detail::read_samples_csv(train, next_id);
    t.val = detail::read_samples_csv(dir / fmt::format("t{}_val.csv", k), next_id);
    t.test = detail::read_samples_csv(dir / fmt::format("t{}_test.csv", k), next_id);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto* part : {&t.train, &t.val, &t.test})
      for (const auto& s : *part) {
        lo = std::min(lo, s.label);
        hi = std::max(hi, s.label + 1);
      }
    if (t.train.empty() || t.val.empty() || t.test.empty())
      throw DataError(fmt::format("task {} has an empty split", k));
    t.classes = {lo, hi};
    tasks.push_back(std::move(t));
  }
  if (tasks.empty()) throw DataError("no t1_train.csv found in " + dir.string());
  return tasks;
}

}  // namespace snv

#endif  // SNV_TASKS_HPP
