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

#ifndef SNV_CONFIG_HPP
#define SNV_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "snv/continual.hpp"
#include "snv/error.hpp"
#include "snv/estimator.hpp"
#include "snv/rng.hpp"
#include "snv/tasks.hpp"

namespace snv {

enum class Scenario { til, cil, both };

/// One experiment. All randomness derives from `seed` through named
/// sub-streams ("data", "init", "shuffle", "permutations").
struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 0;
  Scenario scenario = Scenario::til;
  Method method = Method::snv;
  TilMode til_mode = TilMode::snapshot;
  std::string output_dir = "snv_run";
  StreamConfig stream;
  std::string data_dir;  // when set, tasks are imported instead of generated
  std::vector<std::size_t> hidden{32};
  TrainerConfig trainer;
  EstimatorConfig estimator;
  std::vector<double> pruning_fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  StreamConfig seeded_stream() const {
    StreamConfig s = stream;
    s.seed = derive_seed(seed, "data");
    return s;
  }

  ContinualConfig continual() const {
    ContinualConfig c;
    c.estimator = estimator;
    c.trainer = trainer;
    c.hidden = hidden;
    c.method = method;
    c.til_mode = til_mode;
    c.seed = seed;
    return c;
  }

  void validate() const {
    stream.validate();
    trainer.validate();
    if (method == Method::snv) estimator.validate();
    if (hidden.empty()) throw ConfigError("network.hidden needs at least one hidden layer");
    for (auto h : hidden)
      if (h == 0) throw ConfigError("network.hidden sizes must be positive");
    for (double f : pruning_fractions)
      if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("analysis.pruning_fractions must lie in [0, 1]");
    if (!std::is_sorted(pruning_fractions.begin(), pruning_fractions.end()))
      throw ConfigError("analysis.pruning_fractions must be sorted ascending");
  }

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    auto same_double = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    const auto& ea = a.estimator;
    const auto& eb = b.estimator;
    const auto& sa = a.stream;
    const auto& sb = b.stream;
    return a.seed == b.seed && a.scenario == b.scenario && a.method == b.method &&
           a.til_mode == b.til_mode && a.output_dir == b.output_dir && a.data_dir == b.data_dir &&
           a.hidden == b.hidden && a.pruning_fractions == b.pruning_fractions &&
           sa.n_tasks == sb.n_tasks && sa.classes_per_task == sb.classes_per_task &&
           sa.input_dim == sb.input_dim && sa.samples_per_class == sb.samples_per_class &&
           sa.blob_spread == sb.blob_spread && sa.class_separation == sb.class_separation &&
           a.trainer.lr == b.trainer.lr && a.trainer.epochs == b.trainer.epochs &&
           a.trainer.batch_size == b.trainer.batch_size && a.trainer.patience == b.trainer.patience &&
           a.trainer.momentum == b.trainer.momentum && ea.capacity_ratio == eb.capacity_ratio &&
           same_double(ea.truncation_threshold, eb.truncation_threshold) &&
           ea.confidence == eb.confidence && ea.min_samples == eb.min_samples &&
           ea.max_permutations == eb.max_permutations && ea.racing == eb.racing;
  }
};

namespace detail {

using nlohmann::json;

/// Reads one JSON object, rejecting keys outside `allowed`.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(fmt::format("config: '{}' must be an object", path_));
    for (const auto& [key, _] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) throw ConfigError(fmt::format("config: unknown key '{}'", field(key)));
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }

  void number(const char* key, double& out) const {
    if (!has(key)) return;
    if (!at(key).is_number()) throw type_error(key, "a number");
    out = at(key).get<double>();
  }

  void count(const char* key, std::size_t& out) const {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) throw type_error(key, "a non-negative integer");
    out = at(key).get<std::size_t>();
  }

  void seed(const char* key, std::uint64_t& out) const {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) throw type_error(key, "a non-negative integer");
    out = at(key).get<std::uint64_t>();
  }

  void boolean(const char* key, bool& out) const {
    if (!has(key)) return;
    if (!at(key).is_boolean()) throw type_error(key, "a boolean");
    out = at(key).get<bool>();
  }

  void string(const char* key, std::string& out) const {
    if (!has(key)) return;
    if (!at(key).is_string()) throw type_error(key, "a string");
    out = at(key).get<std::string>();
  }

  template <typename E>
  void choice(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> options) const {
    if (!has(key)) return;
    std::string text;
    string(key, text);
    std::string names;
    for (const auto& [name, value] : options) {
      if (text == name) {
        out = value;
        return;
      }
      names += names.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(fmt::format("config: field '{}' must be one of {} (got '{}')", field(key), names, text));
  }

  ConfigError type_error(const char* key, const char* what) const {
    return ConfigError(fmt::format("config: field '{}' must be {}", field(key), what));
  }

 private:
  const json& j_;
  std::string path_;
};

inline const char* name_of(Scenario s) {
  return s == Scenario::til ? "til" : s == Scenario::cil ? "cil" : "both";
}
inline const char* name_of(Method m) { return m == Method::snv ? "snv" : "naive"; }
inline const char* name_of(TilMode m) { return m == TilMode::snapshot ? "snapshot" : "live"; }

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::ObjectReader;
  ExperimentConfig cfg;
  ObjectReader top(j, "", {"version", "seed", "scenario", "method", "til_inference", "output_dir",
                           "stream", "network", "trainer", "estimator", "analysis"});
  if (!top.has("version")) throw ConfigError("config: missing required field 'version'");
  if (!top.at("version").is_number_integer() || top.at("version").get<int>() != ExperimentConfig::kVersion)
    throw ConfigError(fmt::format("config: field 'version' must be {}", ExperimentConfig::kVersion));
  top.seed("seed", cfg.seed);
  top.choice("scenario", cfg.scenario, {{"til", Scenario::til}, {"cil", Scenario::cil}, {"both", Scenario::both}});
  top.choice("method", cfg.method, {{"snv", Method::snv}, {"naive", Method::naive}});
  top.choice("til_inference", cfg.til_mode, {{"snapshot", TilMode::snapshot}, {"live", TilMode::live}});
  top.string("output_dir", cfg.output_dir);

  if (top.has("stream")) {
    ObjectReader s(top.at("stream"), "stream", {"n_tasks", "classes_per_task", "input_dim", "samples_per_class",
                                                "blob_spread", "class_separation", "data_dir"});
    s.count("n_tasks", cfg.stream.n_tasks);
    s.count("classes_per_task", cfg.stream.classes_per_task);
    s.count("input_dim", cfg.stream.input_dim);
    s.count("samples_per_class", cfg.stream.samples_per_class);
    s.number("blob_spread", cfg.stream.blob_spread);
    s.number("class_separation", cfg.stream.class_separation);
    s.string("data_dir", cfg.data_dir);
  }
  if (top.has("network")) {
    ObjectReader n(top.at("network"), "network", {"hidden"});
    if (n.has("hidden")) {
      const auto& h = n.at("hidden");
      if (!h.is_array()) throw n.type_error("hidden", "an array of positive integers");
      cfg.hidden.clear();
      for (const auto& v : h) {
        if (!v.is_number_unsigned()) throw n.type_error("hidden", "an array of positive integers");
        cfg.hidden.push_back(v.get<std::size_t>());
      }
    }
  }
  if (top.has("trainer")) {
    ObjectReader t(top.at("trainer"), "trainer", {"lr", "epochs", "batch_size", "patience", "momentum"});
    t.number("lr", cfg.trainer.lr);
    t.count("epochs", cfg.trainer.epochs);
    t.count("batch_size", cfg.trainer.batch_size);
    t.count("patience", cfg.trainer.patience);
    t.number("momentum", cfg.trainer.momentum);
  }
  if (top.has("estimator")) {
    ObjectReader e(top.at("estimator"), "estimator", {"capacity_ratio", "truncation_threshold", "confidence",
                                                      "min_samples", "max_permutations", "racing"});
    e.number("capacity_ratio", cfg.estimator.capacity_ratio);
    if (e.has("truncation_threshold")) {
      const auto& tau = e.at("truncation_threshold");
      if (tau.is_string() && tau.get<std::string>() == "-inf")
        cfg.estimator.truncation_threshold = -std::numeric_limits<double>::infinity();
      else if (tau.is_string() && tau.get<std::string>() == "inf")
        cfg.estimator.truncation_threshold = std::numeric_limits<double>::infinity();
      else if (tau.is_number())
        cfg.estimator.truncation_threshold = tau.get<double>();
      else
        throw e.type_error("truncation_threshold", "a number, \"-inf\" or \"inf\"");
    }
    e.number("confidence", cfg.estimator.confidence);
    e.count("min_samples", cfg.estimator.min_samples);
    e.count("max_permutations", cfg.estimator.max_permutations);
    e.boolean("racing", cfg.estimator.racing);
  }
  if (top.has("analysis")) {
    ObjectReader a(top.at("analysis"), "analysis", {"pruning_fractions"});
    if (a.has("pruning_fractions")) {
      const auto& f = a.at("pruning_fractions");
      if (!f.is_array()) throw a.type_error("pruning_fractions", "an array of numbers");
      cfg.pruning_fractions.clear();
      for (const auto& v : f) {
        if (!v.is_number()) throw a.type_error("pruning_fractions", "an array of numbers");
        cfg.pruning_fractions.push_back(v.get<double>());
      }
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// Fully populated echo; parsing it back yields an equal configuration.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["version"] = ExperimentConfig::kVersion;
  j["seed"] = cfg.seed;
  j["scenario"] = detail::name_of(cfg.scenario);
  j["method"] = detail::name_of(cfg.method);
  j["til_inference"] = detail::name_of(cfg.til_mode);
  j["output_dir"] = cfg.output_dir;
  auto& s = j["stream"];
  s["n_tasks"] = cfg.stream.n_tasks;
  s["classes_per_task"] = cfg.stream.classes_per_task;
  s["input_dim"] = cfg.stream.input_dim;
  s["samples_per_class"] = cfg.stream.samples_per_class;
  s["blob_spread"] = cfg.stream.blob_spread;
  s["class_separation"] = cfg.stream.class_separation;
  if (!cfg.data_dir.empty()) s["data_dir"] = cfg.data_dir;
  j["network"]["hidden"] = cfg.hidden;
  auto& t = j["trainer"];
  t["lr"] = cfg.trainer.lr;
  t["epochs"] = cfg.trainer.epochs;
  t["batch_size"] = cfg.trainer.batch_size;
  t["patience"] = cfg.trainer.patience;
  t["momentum"] = cfg.trainer.momentum;
  j["estimator"] = to_json(cfg.estimator);
  j["analysis"]["pruning_fractions"] = cfg.pruning_fractions;
  return j;
}

inline std::vector<TaskSpec> load_tasks(const ExperimentConfig& cfg) {
  return cfg.data_dir.empty() ? make_stream(cfg.seeded_stream()) : import_stream(cfg.data_dir);
}

}  // namespace snv

#endif  // SNV_CONFIG_HPP
