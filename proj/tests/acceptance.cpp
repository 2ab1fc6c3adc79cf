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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (capped at 1 for ctest).

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "snv/snv.hpp"
#include "test_util.hpp"

namespace {

using namespace snv;
namespace fs = std::filesystem;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared pipeline runs (5-task blob stream, 32 hidden units, c = 0.1).

ExperimentConfig standard_config() {
  ExperimentConfig cfg;  // defaults: 5 tasks, d = 8, C = 2, hidden {32}, c = 0.1
  cfg.seed = 0;
  return cfg;
}

struct Pipeline {
  std::vector<TaskSpec> tasks;
  RunResult snv;
  RunResult naive;
};

const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline out;
    const auto cfg = standard_config();
    out.tasks = load_tasks(cfg);
    WorkerPool pool(4);
    out.snv = run_sequence(out.tasks, cfg.continual(), &pool);
    auto naive = cfg.continual();
    naive.method = Method::naive;
    out.naive = run_sequence(out.tasks, naive, &pool);
    return out;
  }();
  return p;
}

// ---------------------------------------------------------------------------

Verdict ac1_axioms() {
  std::size_t games = 0, failures = 0;
  double worst_eff = 0, worst_null = 0, worst_sym = 0, worst_lin = 0, worst_perm = 0, worst_oracle = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    CounterRng rng(derive_seed(seed, "ac1"));
    const std::size_t n = 2 + rng.below(7);  // 2..8
    const auto t1 = testing::random_table(n, derive_seed(seed, "a"));
    const auto t2 = testing::random_table(n, derive_seed(seed, "b"));
    const auto g1 = testing::game_from(n, testing::table_fn(t1));
    const auto phi = exact_shapley(g1);
    const double scale = std::max(1.0, std::abs(phi.grand - phi.baseline));
    worst_eff = std::max(worst_eff, std::abs(phi.rebased_efficiency_gap()) / scale);

    const auto perm = exact_shapley_permutation(testing::game_from(n, testing::table_fn(t1)));
    const auto oracle = testing::brute_force_shapley(n, testing::table_fn(t1));
    for (std::size_t i = 0; i < n; ++i) {
      worst_perm = std::max(worst_perm, std::abs(perm.phi[i] - phi.phi[i]));
      worst_oracle = std::max(worst_oracle, std::abs(oracle[i] - phi.phi[i]));
    }

    std::vector<double> sum(t1.size());
    for (std::size_t m = 0; m < t1.size(); ++m) sum[m] = t1[m] + t2[m];
    const auto p2 = exact_shapley(testing::game_from(n, testing::table_fn(t2)));
    const auto ps = exact_shapley(testing::game_from(n, testing::table_fn(sum)));
    for (std::size_t i = 0; i < n; ++i)
      worst_lin = std::max(worst_lin, std::abs(ps.phi[i] - phi.phi[i] - p2.phi[i]));

    const std::size_t p = rng.below(n);
    std::vector<double> nulled(t1.size());
    for (std::size_t m = 0; m < t1.size(); ++m) nulled[m] = t1[m & ~(std::size_t{1} << p)];
    worst_null = std::max(worst_null, std::abs(exact_shapley(testing::game_from(n, testing::table_fn(nulled))).phi[p]));

    const std::size_t a = rng.below(n);
    std::size_t b = rng.below(n - 1);
    if (b >= a) ++b;
    auto swap = [&](std::size_t m) {
      const std::size_t ba = m >> a & 1, bb = m >> b & 1;
      m &= ~((std::size_t{1} << a) | (std::size_t{1} << b));
      return m | (ba << b) | (bb << a);
    };
    std::vector<double> sym(t1.size());
    for (std::size_t m = 0; m < t1.size(); ++m) sym[m] = t1[m] + t1[swap(m)];
    const auto psym = exact_shapley(testing::game_from(n, testing::table_fn(sym)));
    worst_sym = std::max(worst_sym, std::abs(psym.phi[a] - psym.phi[b]));
    ++games;
  }
  failures += worst_eff > 1e-9;
  failures += worst_null > 1e-12;
  failures += worst_sym > 1e-12;
  failures += worst_lin > 1e-9;
  failures += worst_perm > 1e-9;
  failures += worst_oracle > 1e-9;
  return {failures == 0 && games >= 100,
          fmt::format("{} games; max eff {:.1e} null {:.1e} sym {:.1e} lin {:.1e} subset-vs-perm {:.1e} "
                      "vs brute force {:.1e}",
                      games, worst_eff, worst_null, worst_sym, worst_lin, worst_perm, worst_oracle)};
}

Verdict ac2_consistency() {
  struct Case {
    std::string name;
    std::size_t n;
    testing::MaskFn fn;
  };
  std::vector<Case> cases{{"glove", 3, testing::glove_fn()}};
  for (std::uint64_t g = 0; g < 5; ++g) {
    const std::size_t n = 3 + g % 4;  // 3..6
    cases.push_back({fmt::format("random{}", g), n, testing::table_fn(testing::random_table(n, 500 + g))});
  }
  std::size_t worst_violations = 0;
  std::string where;
  for (const auto& c : cases) {
    const auto exact = testing::brute_force_shapley(c.n, c.fn);
    std::vector<std::size_t> violations(c.n, 0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      EstimatorConfig cfg;
      cfg.capacity_ratio = 0.5;
      cfg.truncation_threshold = -kInf;
      cfg.racing = false;
      cfg.max_permutations = 20000;
      cfg.seed = derive_seed(seed, c.name);
      const auto r = estimate_snv(testing::game_from(c.n, c.fn), cfg);
      for (std::size_t i = 0; i < c.n; ++i) {
        const double band = 4.0 * r.sigma[i] / std::sqrt(static_cast<double>(r.counts[i]));
        if (std::abs(r.phi_hat[i] - exact[i]) > band) ++violations[i];
      }
    }
    for (std::size_t i = 0; i < c.n; ++i)
      if (violations[i] > worst_violations) {
        worst_violations = violations[i];
        where = fmt::format(" ({} player {})", c.name, i);
      }
  }
  return {worst_violations <= 1,
          fmt::format("{} games x 20 seeds x 20000 passes; max band violations per player {}{}", cases.size(),
                      worst_violations, where)};
}

Verdict ac3_racing() {
  std::size_t agree = 0, separated = 0, converged = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CounterRng rng(derive_seed(seed, "ac3"));
    const std::size_t n = 3 + rng.below(6);
    const std::size_t k = 1 + rng.below(n - 1);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(std::span<std::size_t>(perm), rng);
    std::vector<double> w(n);
    for (std::size_t r = 0; r < n; ++r) w[perm[r]] = (r < k ? 3.0 : 0.0) + rng.uniform();
    const auto base = testing::weighted_additive_fn(w);
    const testing::MaskFn fn = [base, seed](std::uint64_t m) {
      CounterRng r(derive_seed(seed, "ac3-noise", m));
      return base(m) + 0.5 * (2.0 * r.uniform() - 1.0);
    };
    const auto exact = testing::brute_force_shapley(n, fn);
    const auto want = top_k_mask(exact, k);

    EstimatorConfig cfg;
    cfg.capacity_ratio = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    cfg.truncation_threshold = -kInf;
    cfg.max_permutations = 2000;
    cfg.seed = seed;
    const auto r = estimate_snv(testing::game_from(n, fn), cfg);
    converged += r.converged;

    double lo = kInf, hi = -kInf, max_delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (want.bits[i]) lo = std::min(lo, exact[i]);
      else hi = std::max(hi, exact[i]);
      max_delta = std::max(max_delta, r.half_width[i]);
    }
    separated += (lo - hi > 2.0 * max_delta) ? 1 : 0;
    agree += (r.mask.bits == want.bits && budget_k(cfg.capacity_ratio, n) == k) ? 1 : 0;
  }
  return {agree == 50 && separated == 50,
          fmt::format("{}/50 masks equal exact top-k; gap > 2x max final half-width in {}/50; "
                      "active set emptied in {}/50",
                      agree, separated, converged)};
}

Verdict ac4_gradients() {
  double worst = 0.0;
  std::size_t checked = 0, bad = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto net = DenseNet::he_init({6, 5, 4, 3}, seed);
    CounterRng rng(derive_seed(seed, "ac4"));
    auto flat = net.flat_params();
    for (auto& p : flat) p += 0.1 * rng.normal();
    net.set_flat_params(flat);
    const auto batch = testing::random_batch(6, 10, 3, rng);
    const auto g = flat_gradient(grad(net, batch));
    constexpr double h = 1e-4;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      auto plus = flat, minus = flat;
      plus[k] += h;
      minus[k] -= h;
      DenseNet a = net, b = net;
      a.set_flat_params(plus);
      b.set_flat_params(minus);
      const double fd = (loss(a, batch) - loss(b, batch)) / (2 * h);
      const double err = std::abs(g[k] - fd);
      const double tol = std::max(1e-5 * std::abs(fd), 1e-8);
      worst = std::max(worst, err / tol);
      bad += err > tol;
      ++checked;
    }
  }
  return {bad == 0, fmt::format("{} components over 20 seeds; worst error/tolerance {:.3f}", checked, worst)};
}

Verdict ac5_freeze() {
  const auto& p = pipeline();
  const auto& res = p.snv;
  const std::size_t t_count = p.tasks.size();
  std::size_t compared = 0, mismatched = 0;
  const auto final_params = res.net.flat_params();
  std::vector<ClassRange> finalized;
  for (std::size_t t = 0; t < t_count; ++t) {
    // parameters frozen at the start of task t+1
    const CumulativeMask b = t == 0 ? CumulativeMask(res.net.n_neurons()) : res.snapshots[t - 1].cumulative;
    const auto freeze = build_freeze_mask(b, res.net, finalized);
    const auto at_start = t == 0 ? DenseNet::he_init(res.net.sizes(), derive_seed(standard_config().seed, "init"))
                                 : res.checkpoints[t - 1];
    const auto before = at_start.flat_params();
    for (std::size_t j = 0; j < before.size(); ++j) {
      if (!freeze.frozen(j)) continue;
      ++compared;
      if (std::bit_cast<std::uint64_t>(before[j]) != std::bit_cast<std::uint64_t>(final_params[j])) ++mismatched;
    }
    finalized.push_back(p.tasks[t].classes);
  }
  // checkpoint text of every frozen neuron's row, too
  std::size_t rows = 0, row_mismatch = 0;
  const auto final_json = to_json(res.net);
  for (std::size_t t = 0; t + 1 < t_count; ++t) {
    const auto snap_json = to_json(res.checkpoints[t]);
    for (std::size_t i = 0; i < res.net.n_neurons(); ++i) {
      if (!res.snapshots[t].cumulative.bits[i]) continue;
      ++rows;
      bool same = true;
      for (const auto& pi : neuron_params(res.net, i)) {
        const auto& a = snap_json["layers"][pi.layer];
        const auto& b = final_json["layers"][pi.layer];
        const std::size_t in = res.net.layer(pi.layer).in();
        if (pi.col) {
          const std::size_t k = pi.row * in + *pi.col;  // row-major storage
          same = same && a["weights"][k].dump() == b["weights"][k].dump();
        } else {
          same = same && a["bias"][pi.row].dump() == b["bias"][pi.row].dump();
        }
      }
      if (!same) ++row_mismatch;
    }
  }
  return {mismatched == 0 && row_mismatch == 0 && compared > 0,
          fmt::format("{} frozen (task, parameter) pairs bit-identical at T ({} differ); {} serialized neuron rows "
                      "({} differ)",
                      compared, mismatched, rows, row_mismatch)};
}

Verdict ac6_zero_forgetting() {
  const auto& p = pipeline();
  const double b_snv = bwt(p.snv.r_til);
  const double b_naive = bwt(p.naive.r_til);
  const double b_naive_cil = bwt(p.naive.r_cil);
  return {b_snv == 0.0 && b_naive < -0.05,
          fmt::format("SNV TIL BWT {} (ACC {:.4f}); naive TIL BWT {:.4f} (CIL {:.4f})", b_snv, acc(p.snv.r_til),
                      b_naive, b_naive_cil)};
}

Verdict ac7_budget() {
  const auto& p = pipeline();
  const auto& res = p.snv;
  const std::size_t n = res.net.n_neurons();
  const auto k = static_cast<std::size_t>(std::floor(standard_config().estimator.capacity_ratio * static_cast<double>(n) + 1e-9));
  bool budget_ok = res.masks.size() == p.tasks.size();
  for (const auto& m : res.masks) budget_ok = budget_ok && popcount(m.bits) == k;

  // CAP by hand from the layer sizes
  const auto sizes = res.net.sizes();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) total += sizes[l] * sizes[l + 1] + sizes[l + 1];
  std::vector<std::size_t> fan_in;
  for (std::size_t l = 1; l + 1 < sizes.size(); ++l)
    for (std::size_t u = 0; u < sizes[l]; ++u) fan_in.push_back(sizes[l - 1]);
  std::size_t owned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (const auto& m : res.masks) any = any || m.bits[i];
    if (any) owned += fan_in[i] + 1;
  }
  const double hand = 100.0 * static_cast<double>(owned) / static_cast<double>(total);
  const double got = cap(res.masks, res.net);

  // a 4-3-2 net with one selected neuron: 5 of 23 parameters
  const double small = cap({TaskMask{{1, 0, 0}, 1}}, DenseNet({4, 3, 2}));
  const bool cap_ok = got == hand && small == 100.0 * 5.0 / 23.0;
  return {budget_ok && cap_ok, fmt::format("popcount(S_t) = {} for all {} tasks: {}; CAP {:.6f}% vs hand {:.6f}%",
                                           k, res.masks.size(), budget_ok ? "yes" : "no", got, hand)};
}

Verdict ac8_ablation() {
  std::size_t failures = 0;
  double worst_dup = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = DenseNet::he_init({5, 6, 4, 3}, seed);
    CounterRng rng(derive_seed(seed, "ac8"));
    const auto batch = testing::random_batch(5, 40, 3, rng);
    const auto means = record_means(net, batch.inputs);
    const AblationSpec all{Coalition::full(net.n_neurons()), means};
    const Eigen::MatrixXd plain = net.forward_batch(batch.inputs);
    const Eigen::MatrixXd kept = net.forward_batch(batch.inputs, &all);
    if (std::memcmp(plain.data(), kept.data(), sizeof(double) * static_cast<std::size_t>(plain.size())) != 0) ++failures;
    const AblationSpec none{Coalition(net.n_neurons()), means};
    const Eigen::MatrixXd flat = net.forward_batch(batch.inputs, &none);
    for (Eigen::Index j = 1; j < flat.cols(); ++j)
      if (flat.col(j) != flat.col(0)) ++failures;

    auto dup = DenseNet::he_init({3, 5, 3}, seed + 100);
    auto& l0 = dup.layer(0);
    l0.weights.row(3) = l0.weights.row(1);
    l0.bias(3) = l0.bias(1);
    auto& l1 = dup.layer(1);
    l1.weights.col(1) *= 0.5;
    l1.weights.col(3) = l1.weights.col(1);
    const auto eval = testing::random_batch(3, 60, 3, rng);
    const auto phi = exact_shapley(performance_oracle(dup, eval, record_means(dup, eval.inputs)));
    worst_dup = std::max(worst_dup, std::abs(phi.phi[1] - phi.phi[3]));
  }
  if (worst_dup > 1e-9) ++failures;
  return {failures == 0,
          fmt::format("10 nets: keep-all bitwise equal, keep-none input independent; duplicate-pair max |dphi| {:.1e}",
                      worst_dup)};
}

Verdict ac9_round_trips() {
  const auto& p = pipeline();
  const auto dir = fs::temp_directory_path() / "snv_acceptance_ac9";
  fs::remove_all(dir);
  auto cfg = standard_config();
  cfg.scenario = Scenario::both;
  cfg.output_dir = dir.string();
  const auto summary = write_run_artifacts(dir, cfg, p.snv, p.tasks, 4);
  const auto r_til = parse_accuracy_matrix_csv(read_text(dir / "R_til.csv"));
  const auto r_cil = parse_accuracy_matrix_csv(read_text(dir / "R_cil.csv"));
  const auto masks = parse_masks_csv(read_text(dir / "masks.csv"));
  const auto on_disk = nlohmann::json::parse(read_text(dir / "summary.json"));
  std::vector<std::string> bad;
  if (acc(r_til) != acc(p.snv.r_til) || bwt(r_til) != bwt(p.snv.r_til)) bad.push_back("R_til");
  if (acc(r_cil) != acc(p.snv.r_cil) || bwt(r_cil) != bwt(p.snv.r_cil)) bad.push_back("R_cil");
  if (on_disk["til"]["acc"].get<double>() != acc(r_til) || on_disk["cil"]["bwt"].get<double>() != bwt(r_cil))
    bad.push_back("summary acc/bwt");
  const auto jm = jaccard_matrix(masks);
  if (jm != jaccard_matrix(p.snv.masks) || on_disk["jaccard"].get<std::vector<std::vector<double>>>() != jm)
    bad.push_back("jaccard");
  for (std::size_t t = 0; t < jm.size(); ++t)
    if (jm[t][t] != 1.0) bad.push_back("jaccard diagonal");
  const auto pooled = pool_tasks(p.tasks);
  const double baseline = accuracy(predict(p.snv.net, pooled.test.inputs), pooled.test.labels);
  const auto& curve = on_disk["pruning_curve"];
  if (curve.empty() || curve[0][0].get<double>() != 0.0 || curve[0][1].get<double>() != baseline)
    bad.push_back("pruning f=0");
  fs::remove_all(dir);
  std::string detail = bad.empty() ? "R_til, R_cil, masks, summary all reproduce in-memory values; f=0 accuracy " +
                                         fmt::format("{}", baseline)
                                   : "mismatch: ";
  for (const auto& b : bad) detail += b + " ";
  return {bad.empty() && summary == on_disk, detail};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict ac10_determinism() {
  const auto dir = fs::temp_directory_path() / "snv_acceptance_ac10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cfg = standard_config();
  cfg.output_dir = (dir / "unused").string();
  write_text(dir / "config.json", dump_json(to_json(cfg)));
  const std::string base = std::string(SNV_CLI_PATH) + " run --config " + (dir / "config.json").string();
  const std::vector<std::pair<std::string, int>> runs{{"w1a", 1}, {"w1b", 1}, {"w4", 4}, {"w3", 3}};
  for (const auto& [name, workers] : runs) {
    const int code = shell(base + fmt::format(" --workers {} --output {} > /dev/null", workers, (dir / name).string()));
    if (code != 0) return {false, fmt::format("run {} exited with {}", name, code)};
  }
  std::vector<std::string> differing;
  for (const char* f : {"R.csv", "masks.csv", "summary.json"})
    for (std::size_t r = 1; r < runs.size(); ++r)
      if (read_text(dir / runs[0].first / f) != read_text(dir / runs[r].first / f))
        differing.push_back(runs[r].first + "/" + f);
  fs::remove_all(dir);
  std::string detail = "4 invocations (workers 1, 1, 4, 3): R.csv, masks.csv, summary.json ";
  if (differing.empty()) {
    detail += "byte-identical";
  } else {
    detail += "differ:";
    for (const auto& d : differing) detail += " " + d;
  }
  return {differing.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"exact-oracle axioms", ac1_axioms},
      {"estimator consistency", ac2_consistency},
      {"racing correctness", ac3_racing},
      {"gradient check", ac4_gradients},
      {"freeze integrity", ac5_freeze},
      {"zero forgetting (TIL)", ac6_zero_forgetting},
      {"budget exactness", ac7_budget},
      {"mean-ablation contracts", ac8_ablation},
      {"metric round-trips", ac9_round_trips},
      {"determinism", ac10_determinism},
  };
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[c].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += v.pass ? 0 : 1;
    std::cout << fmt::format("AC{:<2} {} {} | {} [{:.1f}s]", c + 1, v.pass ? "PASS" : "FAIL", criteria[c].first,
                             v.detail, secs)
              << std::endl;
  }
  std::cout << fmt::format("{}/{} criteria passed", criteria.size() - static_cast<std::size_t>(failed),
                           criteria.size())
            << std::endl;
  return failed == 0 ? 0 : 1;
}
