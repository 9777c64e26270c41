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

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "ww/error.hpp"
#include "ww/eval.hpp"
#include "ww/synth.hpp"

namespace eval = ww::eval;
using eval::RocPoint;

TEST_CASE("accuracy") {
  CHECK(eval::accuracy({1, 2, 3, 0}, {1, 2, 0, 0}) == 0.75);
  CHECK_THROWS_AS(eval::accuracy({}, {}), ww::ConfigError);
  CHECK_THROWS_AS(eval::accuracy({1}, {1, 2}), ww::DimensionError);
}

TEST_CASE("threshold grid") {
  CHECK(eval::threshold_grid(5) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  const auto g = eval::threshold_grid(100);
  CHECK(g.size() == 100);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK_THROWS_AS(eval::threshold_grid(1), ww::ConfigError);
}

TEST_CASE("operating point selection") {
  const std::vector<RocPoint> roc = {
      {0.2, 9.0, 0.01}, {0.4, 3.0, 0.05}, {0.5, 2.0, 0.05}, {0.6, 1.0, 0.2}, {0.8, 0.0, 0.6}};
  auto op = eval::choose_operating_point(roc, 4.0);
  CHECK(op.within_budget);
  CHECK(op.point == RocPoint{0.5, 2.0, 0.05});
  op = eval::choose_operating_point(roc, 0.5);
  CHECK(op.point == RocPoint{0.8, 0.0, 0.6});
  op = eval::choose_operating_point(roc, 100.0);
  CHECK(op.point.threshold == 0.2);
  // Equal FRR and FAR: the lower threshold wins.
  op = eval::choose_operating_point({{0.3, 1.0, 0.1}, {0.7, 1.0, 0.1}}, 2.0);
  CHECK(op.point.threshold == 0.3);
  op = eval::choose_operating_point({{0.1, 8.0, 0.0}, {0.9, 6.0, 0.5}}, 1.0);
  CHECK_FALSE(op.within_budget);
  CHECK(op.point.threshold == 0.9);
  CHECK_THROWS_AS(eval::choose_operating_point({}, 1.0), ww::ConfigError);
}

TEST_CASE("ROC CSV and JSON") {
  const std::vector<RocPoint> roc = {{0.0, 12.5, 0.0}, {1.0, 0.0, 1.0}};
  CHECK(eval::roc_to_csv(roc) == "threshold,far_per_hour,frr\n0.000000,12.500000,0.000000\n"
                                 "1.000000,0.000000,1.000000\n");
  CHECK(nlohmann::json(roc[0]).dump() == R"({"far_per_hour":12.5,"frr":0.0,"threshold":0.0})");
}

TEST_CASE("wake ROC of the synthetic model is monotone") {
  testutil::TempDir d;
  ww::dataset::WakeWordDataset ds;
  const auto bundle = ww::models::import_bundle(testutil::train_synthetic_wake(d.path(), 9, &ds));
  const auto clf = ww::infer::Classifier::from_bundle(bundle);
  const auto clips = ww::train::wake_clips(ds, ww::dataset::Split::kTest);
  REQUIRE_FALSE(clips.positives.empty());
  REQUIRE_FALSE(clips.negatives.empty());
  const eval::WakeEvaluation ev(clf, bundle.inference, 2, clips.positives, clips.negatives);
  CHECK(ev.positive_count() == clips.positives.size());
  const auto roc = ev.roc(eval::threshold_grid(101));
  REQUIRE(roc.size() == 101);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CAPTURE(roc[i].threshold);
    CHECK(roc[i].frr >= roc[i - 1].frr);
    CHECK(roc[i].far_per_hour <= roc[i - 1].far_per_hour);
  }
  CHECK(roc.back() == RocPoint{1.0, 0.0, 1.0});
  CHECK(ev.at(0.5).frr < 0.5);
  CHECK(eval::wake_roc(clf, bundle.inference, 2, clips.positives, clips.negatives, {0.5, 0.2}) ==
        std::vector<RocPoint>{ev.at(0.2), ev.at(0.5)});
  CHECK_THROWS_AS(eval::WakeEvaluation(clf, bundle.inference, 2, {}, clips.negatives), ww::ConfigError);
}

TEST_CASE("commands dataset from a Speech Commands tree") {
  testutil::TempDir d;
  ww::synth::write_speech_commands_tree(d / "sc", {"yes", "no", "up", "down"}, 12, 6, 0.2, 0.2, 3);
  eval::CommandsOptions o;
  o.targets = {"yes", "no"};
  const auto cds = eval::load_commands_dataset(d / "sc", o);
  CHECK(cds.labels == std::vector<std::string>{"yes", "no", "unknown", "silence"});
  std::size_t total = 0;
  for (const auto& [split, examples] : cds.splits) {
    std::map<int, std::size_t> per;
    for (const auto& e : examples) {
      CHECK(e.clip.size() == 16000);
      ++per[e.label];
    }
    CHECK(per[3] == static_cast<std::size_t>(std::llround((per[0] + per[1]) / 2.0)));
    total += examples.size() - per[3];
  }
  CHECK(total == 48);

  o.max_per_class = 2;
  const auto capped = eval::load_commands_dataset(d / "sc", o);
  for (const auto& [split, examples] : capped.splits) {
    std::map<int, std::size_t> per;
    for (const auto& e : examples) ++per[e.label];
    for (int label : {0, 1, 2}) CHECK(per[label] <= 2);
  }
  CHECK_THROWS_AS(eval::load_commands_dataset(d / "missing", o), ww::IoError);
  o.targets.clear();
  CHECK_THROWS_AS(eval::load_commands_dataset(d / "sc", o), ww::ConfigError);
}

TEST_CASE("commands accuracy rejects empty splits") {
  ww::features::DatasetStats stats;
  const ww::infer::Classifier clf(ww::models::Res8<float>(ww::models::Res8Config{3, 4}, 1),
                                  ww::features::Frontend(ww::features::FrontendConfig{}, stats));
  std::map<std::string, std::vector<eval::Example>> splits;
  splits["dev"] = {{ww::audio::AudioClip::silence(16000, 16000), 0}};
  const auto acc = eval::commands_accuracy(clf, splits);
  CHECK((acc.at("dev") == 0.0 || acc.at("dev") == 1.0));
  splits["test"] = {};
  CHECK_THROWS_AS(eval::commands_accuracy(clf, splits), ww::ConfigError);
}
