// Copyright 2026 The Wakeword Authors. All Rights Reserved.
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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "ww/error.hpp"
#include "ww/optim.hpp"
#include "ww/random.hpp"
#include "ww/train.hpp"

namespace train = ww::train;
using ww::audio::AudioClip;
using nlohmann::json;

namespace {

// Class c is a tone at 500 * (c + 1) Hz over light noise; 0.5 s each.
std::vector<train::Example> tone_examples(std::size_t per_class, std::size_t classes, uint64_t seed) {
  ww::Rng rng(seed);
  std::vector<train::Example> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      const double hz = 500.0 * static_cast<double>(c + 1) * rng.uniform(0.97, 1.03);
      std::vector<float> x(8000);
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = static_cast<float>(0.3 * std::sin(2 * std::numbers::pi * hz * k / 16000.0) +
                                  rng.uniform(-0.01, 0.01));
      }
      out.push_back({AudioClip(x, 16000), static_cast<int>(c)});
    }
  }
  return out;
}

train::TrainTask tone_task(std::size_t classes, uint64_t seed) {
  train::TrainTask task;
  task.train = tone_examples(6, classes, seed);
  task.model.n_labels = classes;
  task.model.n_maps = 4;
  task.task = "commands";
  for (std::size_t c = 0; c < classes; ++c) task.labels.push_back("c" + std::to_string(c));
  task.policy = ww::augment::default_policy();
  return task;
}

train::TrainConfig small_config(uint64_t seed) {
  train::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 6;
  cfg.lr = 5e-3;
  cfg.balance = {0, 0};
  cfg.seed = seed;
  return cfg;
}

std::string blob(const std::filesystem::path& bundle) {
  return testutil::read_text(bundle / "params.bin");
}

}  // namespace

TEST_CASE("parse_balance") {
  CHECK(train::parse_balance("1:3").positive == 1);
  CHECK(train::parse_balance("1:3").negative == 3);
  CHECK(train::parse_balance("2:5").enabled());
  CHECK_FALSE(train::parse_balance("none").enabled());
  CHECK_FALSE(train::parse_balance("0").enabled());
  for (const char* bad : {"1", "1:", ":3", "a:b", "-1:3", "1:3x"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(train::parse_balance(bad), ww::ConfigError);
  }
}

TEST_CASE("scheduled learning rate") {
  train::TrainConfig c;
  c.lr = 0.01;
  c.epochs = 10;
  CHECK(train::scheduled_lr(c, 0) == doctest::Approx(0.01));
  CHECK(train::scheduled_lr(c, 5) == doctest::Approx(0.005));
  for (std::size_t e = 1; e < 10; ++e) CHECK(train::scheduled_lr(c, e) < train::scheduled_lr(c, e - 1));
  c.schedule = "constant";
  CHECK(train::scheduled_lr(c, 7) == 0.01);
}

TEST_CASE("balanced batches hold 1 positive and 3 negatives") {
  // Labels 0 positive, 1 negative: 4 positives and 12 negatives.
  std::vector<train::Example> ex;
  for (int i = 0; i < 16; ++i) ex.push_back({AudioClip::silence(4000, 16000), i < 4 ? 0 : 1});
  ww::features::DatasetStats stats;
  const ww::features::Frontend fe(ww::features::FrontendConfig{}, stats);
  const train::BatchMaker maker(ex, 1, fe, nullptr, 4, {1, 3}, 9);
  CHECK(maker.positives_per_batch() == 1);
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    const auto plan = maker.epoch_plan(epoch);
    REQUIRE(plan.size() == 4);
    std::set<std::size_t> negs;
    std::size_t pos = 0;
    for (const auto& b : plan) {
      REQUIRE(b.size() == 4);
      for (auto i : b) {
        if (ex[i].label == 0) {
          ++pos;
        } else {
          negs.insert(i);
        }
      }
    }
    CHECK(pos == 4);
    CHECK(negs.size() == 12);
    CHECK(plan == maker.epoch_plan(epoch));
  }
  CHECK_FALSE(maker.epoch_plan(0) == maker.epoch_plan(1));
  CHECK_THROWS_AS(train::BatchMaker(std::vector<train::Example>(ex.begin(), ex.begin() + 4), 1, fe,
                                    nullptr, 4, {1, 3}, 9),
                  ww::ConfigError);
}

TEST_CASE("unbalanced epochs visit every example once") {
  const auto ex = tone_examples(5, 2, 1);
  ww::features::DatasetStats stats;
  const ww::features::Frontend fe(ww::features::FrontendConfig{}, stats);
  const train::BatchMaker maker(ex, -1, fe, nullptr, 3, {1, 3}, 4);
  std::multiset<std::size_t> seen;
  for (const auto& b : maker.epoch_plan(2)) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 10);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 10);
}

TEST_CASE("TrainConfig JSON round trip") {
  train::TrainConfig c;
  c.optimizer = "sgd";
  c.lr = 0.25;
  c.balance = {2, 5};
  c.seed = 77;
  c.augment = false;
  const train::TrainConfig back = json(c).get<train::TrainConfig>();
  CHECK(json(back) == json(c));
}

TEST_CASE("seeded training is bit-identical and the loss falls") {
  testutil::TempDir d;
  const auto task = tone_task(3, 5);
  const auto cfg = small_config(11);
  const auto a = train::train(task, cfg, d / "a");
  const auto b = train::train(task, cfg, d / "b");
  REQUIRE(a.log.size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    const std::string name = "ckpt-" + std::to_string(e) + ".bundle";
    CHECK(blob(d / "a" / name) == blob(d / "b" / name));
  }
  CHECK(a.log.back().loss < a.log.front().loss);
  CHECK(std::filesystem::exists(a.best_bundle / "manifest.json"));
  CHECK(testutil::read_text(d / "a" / "train_log.jsonl") == testutil::read_text(d / "b" / "train_log.jsonl"));
  auto other = cfg;
  other.seed = 12;
  train::train(task, other, d / "c");
  CHECK_FALSE(blob(d / "a" / "ckpt-3.bundle") == blob(d / "c" / "ckpt-3.bundle"));
}

TEST_CASE("zero learning rate leaves the parameters unchanged") {
  testutil::TempDir d;
  const auto task = tone_task(2, 3);
  auto cfg = small_config(2);
  cfg.lr = 0.0;
  cfg.epochs = 2;
  train::train(task, cfg, d / "run");
  const auto first = ww::models::import_bundle(d / "run" / "ckpt-0.bundle");
  const auto last = ww::models::import_bundle(d / "run" / "ckpt-1.bundle");
  const ww::models::Res8<float> init(task.model, ww::derive_seed(cfg.seed, 0x3d));
  std::size_t k = 0;
  for (std::size_t i = 0; i < last.tensors.size(); ++i) {
    if (last.tensors[i].buffer) continue;
    CHECK(last.tensors[i].values == first.tensors[i].values);
    CHECK(last.tensors[i].values == init.parameters()[k++].tensor.values());
  }
  CHECK(k == init.parameters().size());
}

TEST_CASE("resuming continues bit-identically") {
  testutil::TempDir d;
  const auto task = tone_task(3, 8);
  const auto cfg = small_config(21);
  train::train(task, cfg, d / "full");
  // Same config, restarted from the epoch-1 checkpoint of the uninterrupted run.
  const auto r = train::train(task, cfg, d / "resumed", d / "full" / "ckpt-1.bundle");
  CHECK(r.log.size() == 4);
  CHECK_FALSE(std::filesystem::exists(d / "resumed" / "ckpt-1.bundle"));
  for (const char* name : {"ckpt-2.bundle", "ckpt-3.bundle"}) {
    CHECK(blob(d / "full" / name) == blob(d / "resumed" / name));
  }
  CHECK(testutil::read_text(d / "full" / "train_log.jsonl") ==
        testutil::read_text(d / "resumed" / "train_log.jsonl"));
}

TEST_CASE("dev metric and best checkpoint") {
  testutil::TempDir d;
  auto task = tone_task(3, 4);
  task.dev = train::accuracy_metric(tone_examples(3, 3, 99));
  auto cfg = small_config(6);
  cfg.epochs = 3;
  const auto r = train::train(task, cfg, d / "run");
  for (const auto& rec : r.log) {
    REQUIRE(rec.dev_metric.has_value());
    CHECK(*rec.dev_metric >= 0.0);
    CHECK(*rec.dev_metric <= 1.0);
    CHECK(*rec.dev_metric <= r.best_score);
  }
  CHECK(r.log[r.best_epoch].dev_metric == r.best_score);
  const std::string name = "ckpt-" + std::to_string(r.best_epoch) + ".bundle";
  CHECK(blob(d / "run" / name) == blob(r.best_bundle));
  // The metric is a pure function of the checkpoint.
  const auto clf = ww::infer::Classifier::from_bundle(ww::models::import_bundle(r.best_bundle));
  CHECK(task.dev->fn(clf) == r.best_score);
}

TEST_CASE("training input errors") {
  testutil::TempDir d;
  auto task = tone_task(2, 1);
  auto cfg = small_config(1);
  cfg.epochs = 1;
  auto wrong = task;
  wrong.labels.push_back("extra");
  CHECK_THROWS_AS(train::train(wrong, cfg, d / "x"), ww::ConfigError);
  cfg.optimizer = "rmsprop";
  CHECK_THROWS_AS(train::train(task, cfg, d / "y"), ww::ConfigError);
  cfg.optimizer = "adam";
  cfg.lr = 1e30;
  cfg.augment = false;
  cfg.epochs = 3;
  CHECK_THROWS_AS(train::train(task, cfg, d / "z"), ww::TrainingError);
}

TEST_CASE("wake examples from a synthetic corpus") {
  testutil::TempDir d;
  const auto ds = testutil::synthetic_wake_corpus(d / "c", 3, 6, 6);
  const auto ex = train::wake_examples(ds, ww::dataset::Split::kTrain, {2.0, 0.2, 1.0, 0});
  std::size_t hey = 0, firefox = 0, neg = 0;
  for (const auto& e : ex) {
    CHECK(e.clip.size() == 32000);
    hey += e.label == 0;
    firefox += e.label == 1;
    neg += e.label == 2;
  }
  CHECK(hey == firefox);
  CHECK(hey > 0);
  CHECK(neg > hey);
}

TEST_CASE("batch of 16 at 1:3 holds 4 positives and 12 negatives") {
  std::vector<train::Example> ex;
  for (int i = 0; i < 40; ++i) ex.push_back({AudioClip::silence(16000, 16000), i < 10 ? i % 2 : 2});
  ww::features::DatasetStats stats;
  const ww::features::Frontend fe(ww::features::FrontendConfig{}, stats);
  const train::BatchMaker maker(ex, 2, fe, nullptr, 16, train::parse_balance("1:3"), 3);
  CHECK(maker.positives_per_batch() == 4);
  const auto plan = maker.epoch_plan(0);
  for (std::size_t b = 0; b < plan.size(); ++b) {
    const auto batch = maker.make(plan[b], 0, b);
    CHECK(batch.inputs.shape() == ww::nn::Shape{16, 1, 98, 40});
    CHECK(std::count(batch.labels.begin(), batch.labels.end(), 2) == 12);
  }
  CHECK(maker.make(plan[0], 0, 0).inputs.values() == maker.make(plan[0], 0, 0).inputs.values());
}

TEST_CASE("one small SGD step lowers the batch loss in most trials") {
  const auto ex = tone_examples(4, 3, 12);
  const auto stats = train::fit_example_stats(ex, ww::features::FrontendConfig{});
  const ww::features::Frontend fe(ww::features::FrontendConfig{}, stats);
  const train::BatchMaker maker(ex, -1, fe, nullptr, 12, {0, 0}, 1);
  int lower = 0;
  for (uint64_t trial = 0; trial < 20; ++trial) {
    ww::models::Res8<float> model(ww::models::Res8Config{3, 4}, trial);
    const auto batch = maker.make_clean(maker.epoch_plan(trial)[0]);
    const auto before = ww::nn::nll_loss(model.forward(batch.inputs, true), batch.labels).item();
    ww::nn::Sgd<float> opt(model.parameter_tensors(), 1e-4);
    opt.zero_grad();
    ww::nn::backward(ww::nn::nll_loss(model.forward(batch.inputs, true), batch.labels));
    opt.step();
    const auto after = ww::nn::nll_loss(model.forward(batch.inputs, true), batch.labels).item();
    lower += after < before;
  }
  CHECK(lower > 10);
}
