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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "test_util.hpp"

namespace snv {
namespace {

namespace fs = std::filesystem;

std::vector<Sample> labelled(std::size_t per_class, std::size_t classes) {
  std::vector<Sample> data;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k) data.push_back({data.size(), {static_cast<double>(k)}, c});
  return data;
}

std::set<std::uint64_t> ids(const std::vector<Sample>& s) {
  std::set<std::uint64_t> out;
  for (const auto& x : s) out.insert(x.id);
  return out;
}

TEST(SplitTest, SeventyTenTwenty) {
  const auto r = split(labelled(10, 3), SplitFractions{}, 1);
  EXPECT_EQ(r.train.size(), 21u);
  EXPECT_EQ(r.val.size(), 3u);
  EXPECT_EQ(r.test.size(), 6u);
  for (std::size_t c = 0; c < 3; ++c) {
    auto count = [c](const std::vector<Sample>& s) {
      return std::count_if(s.begin(), s.end(), [c](const Sample& x) { return x.label == c; });
    };
    EXPECT_EQ(count(r.train), 7);
    EXPECT_EQ(count(r.val), 1);
    EXPECT_EQ(count(r.test), 2);
  }
  EXPECT_TRUE(r.warnings.empty());
}

TEST(SplitTest, AllTrain) {
  const auto r = split(labelled(10, 2), SplitFractions{1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(r.train.size(), 20u);
  EXPECT_TRUE(r.val.empty());
  EXPECT_TRUE(r.test.empty());
  EXPECT_TRUE(r.warnings.empty());
}

TEST(SplitTest, TinyClassesWarn) {
  const auto r = split(labelled(2, 1), SplitFractions{}, 1);
  EXPECT_EQ(r.train.size() + r.val.size() + r.test.size(), 2u);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_THROW(split(labelled(2, 1), SplitFractions{0.5, 0.5, 0.5}, 1), PreconditionError);
}

TEST(SplitTest, InputOrderDoesNotMatter) {
  auto data = labelled(37, 3);
  const auto a = split(data, SplitFractions{}, 99);
  CounterRng rng(4);
  shuffle(std::span<Sample>(data), rng);
  const auto b = split(data, SplitFractions{}, 99);
  EXPECT_EQ(ids(a.train), ids(b.train));
  EXPECT_EQ(ids(a.val), ids(b.val));
  EXPECT_EQ(ids(a.test), ids(b.test));
  EXPECT_NE(ids(a.train), ids(split(data, SplitFractions{}, 100).train));
}

TEST(SplitTest, DisjointAndCovering) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    const auto data = labelled(1 + rng.below(50), 1 + rng.below(4));
    const auto r = split(data, SplitFractions{}, seed);
    auto all = ids(r.train);
    for (auto i : ids(r.val)) EXPECT_TRUE(all.insert(i).second);
    for (auto i : ids(r.test)) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all, ids(data));
  }
}

TEST(StreamTest, ShapeLabelsAndFractions) {
  StreamConfig cfg = testing::blob_stream(4, 3);
  cfg.samples_per_class = 53;
  const auto tasks = make_stream(cfg);
  ASSERT_EQ(tasks.size(), 4u);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(tasks[t].task_id, static_cast<int>(t + 1));
    EXPECT_EQ(tasks[t].classes, (ClassRange{2 * t, 2 * t + 2}));
    const double n = 2.0 * 53.0;
    EXPECT_NEAR(static_cast<double>(tasks[t].train.size()), 0.7 * n, 2.0);  // within one sample per class
    EXPECT_NEAR(static_cast<double>(tasks[t].val.size()), 0.1 * n, 2.0);
    EXPECT_NEAR(static_cast<double>(tasks[t].test.size()), 0.2 * n, 2.0);
    for (const auto* part : {&tasks[t].train, &tasks[t].val, &tasks[t].test})
      for (const auto& s : *part) {
        EXPECT_TRUE(tasks[t].classes.contains(s.label));
        EXPECT_EQ(s.x.size(), 8u);
      }
  }
}

TEST(StreamTest, Deterministic) {
  const auto cfg = testing::blob_stream(3, 77);
  EXPECT_EQ(make_stream(cfg), make_stream(cfg));
  auto other = cfg;
  other.seed = 78;
  EXPECT_NE(make_stream(cfg), make_stream(other));
}

TEST(StreamTest, ClassMeansMatchCentres) {
  StreamConfig cfg = testing::blob_stream(3, 5);
  cfg.samples_per_class = 400;
  cfg.blob_spread = 1.5;
  const auto centres = blob_centers(cfg);
  const auto tasks = make_stream(cfg);
  for (const auto& centre : centres) {
    double norm = 0.0;
    for (double v : centre) norm += v * v;
    EXPECT_NEAR(std::sqrt(norm), cfg.class_separation, 1e-12);
  }
  for (const auto& t : tasks) {
    std::vector<std::vector<double>> sum(centres.size(), std::vector<double>(8, 0.0));
    std::vector<double> count(centres.size(), 0.0);
    for (const auto* part : {&t.train, &t.val, &t.test})
      for (const auto& s : *part) {
        for (std::size_t d = 0; d < 8; ++d) sum[s.label][d] += s.x[d];
        count[s.label] += 1.0;
      }
    for (std::size_t c = t.classes.begin; c < t.classes.end; ++c) {
      ASSERT_EQ(count[c], 400.0);
      for (std::size_t d = 0; d < 8; ++d)
        EXPECT_NEAR(sum[c][d] / count[c], centres[c][d], 4.0 * cfg.blob_spread / std::sqrt(count[c]));
    }
  }
}

TEST(StreamTest, SeparatedBlobsAreLearnable) {
  StreamConfig cfg;
  cfg.n_tasks = 3;
  cfg.classes_per_task = 2;
  cfg.input_dim = 2;
  cfg.class_separation = 10.0;
  cfg.blob_spread = 1.0;
  cfg.seed = 21;
  const auto tasks = make_stream(cfg);
  for (const auto& t : tasks) {
    auto net = DenseNet::he_init({2, 16, 6}, 3);
    train_task(net, t, FreezeMask{Bits(net.param_count(), 1)}, TrainerConfig{}, 4);
    const auto test = to_batch(t.test);
    EXPECT_GE(accuracy(predict(net, test.inputs, nullptr, t.classes), test.labels), 0.95) << t.task_id;
  }
}

TEST(StreamTest, RejectsBadConfig) {
  StreamConfig cfg;
  cfg.n_tasks = 0;
  EXPECT_THROW(make_stream(cfg), ConfigError);
  cfg = StreamConfig{};
  cfg.class_separation = 0.0;
  EXPECT_THROW(make_stream(cfg), ConfigError);
}

TEST(StreamTest, ExportImportRoundTrip) {
  const auto tasks = make_stream(testing::blob_stream(2, 31));
  const fs::path dir = fs::temp_directory_path() / "snv_stream_roundtrip";
  fs::remove_all(dir);
  export_stream(tasks, dir);
  EXPECT_TRUE(fs::exists(dir / "t2_test.csv"));
  const auto back = import_stream(dir);
  ASSERT_EQ(back.size(), tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    EXPECT_EQ(back[t].classes, tasks[t].classes);
    ASSERT_EQ(back[t].train.size(), tasks[t].train.size());
    for (std::size_t j = 0; j < tasks[t].train.size(); ++j) {
      EXPECT_EQ(back[t].train[j].x, tasks[t].train[j].x);
      EXPECT_EQ(back[t].train[j].label, tasks[t].train[j].label);
    }
    EXPECT_EQ(back[t].test.size(), tasks[t].test.size());
  }
  fs::remove(dir / "t2_val.csv");
  EXPECT_THROW(import_stream(dir), DataError);
  fs::remove_all(dir);
  EXPECT_THROW(import_stream(dir), DataError);
}

TEST(StreamTest, ToBatchLayout) {
  const auto b = to_batch({{0, {1.0, 2.0}, 3}, {1, {4.0, 5.0}, 1}});
  EXPECT_EQ(b.inputs.rows(), 2);
  EXPECT_EQ(b.inputs(1, 0), 2.0);
  EXPECT_EQ(b.inputs(0, 1), 4.0);
  EXPECT_EQ(b.labels, (std::vector<std::size_t>{3, 1}));
  EXPECT_THROW(to_batch({{0, {1.0}, 0}, {1, {1.0, 2.0}, 0}}), DataError);
}

}  // namespace
}  // namespace snv
