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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ww/audio.hpp"
#include "ww/dataset.hpp"
#include "ww/infer.hpp"

namespace ww::eval {

/// A fixed-length clip and its class id.
struct Example {
  audio::AudioClip clip;
  int label = 0;
};

/// Fraction of predictions equal to the truth. Empty input is an error.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// argmax of the classifier's posteriors for every example.
std::vector<int> predict(const infer::Classifier& classifier, const std::vector<Example>& examples);

/// Accuracy per named split. Throws ConfigError if any split is empty.
std::map<std::string, double> commands_accuracy(
    const infer::Classifier& classifier,
    const std::map<std::string, std::vector<Example>>& splits);

struct CommandsOptions {
  std::vector<std::string> targets;  // e.g. yes, no
  double clip_s = 1.0;
  /// Keep at most this many clips per class and split (0: no limit); the
  /// kept clips are chosen by a stable hash of the path.
  std::size_t max_per_class = 0;
  /// Silence examples per split relative to the mean target-class count.
  double silence_ratio = 1.0;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
  uint64_t seed = 0;
};

/// Speech Commands classification set: labels 0..k-1 are the targets, k is
/// "unknown" (every other keyword, at its natural rate) and k+1 is
/// "silence" (1 s cuts of the background-noise files at random gains).
struct CommandsDataset {
  std::vector<std::string> labels;
  std::map<dataset::Split, std::vector<Example>> splits;
};

/// Samples without a preset split are assigned by speaker hash.
CommandsDataset build_commands_dataset(const std::vector<dataset::Sample>& samples,
                                       const std::vector<audio::AudioClip>& noise,
                                       const CommandsOptions& options);

/// Loads `root` (Speech Commands layout), including _background_noise_.
CommandsDataset load_commands_dataset(const std::filesystem::path& root,
                                      const CommandsOptions& options);

struct RocPoint {
  double threshold = 0.0;
  double far_per_hour = 0.0;
  double frr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

void to_json(nlohmann::json& j, const RocPoint& p);

/// n evenly spaced thresholds covering [0, 1].
std::vector<double> threshold_grid(std::size_t n);

/// Posteriors computed once; decoding is repeated per threshold.
class WakeEvaluation {
 public:
  /// Positive clips are padded with window_s of leading and 0.5 s of trailing
  /// silence so a phrase at either edge is still seen whole. The negatives
  /// are concatenated into one stream.
  WakeEvaluation(const infer::Classifier& classifier, const models::InferenceSettings& settings,
                 std::size_t n_words, const std::vector<audio::AudioClip>& positives,
                 const std::vector<audio::AudioClip>& negatives);

  RocPoint at(double threshold) const;
  std::vector<RocPoint> roc(const std::vector<double>& thresholds) const;

  double negative_hours() const { return negative_hours_; }
  std::size_t positive_count() const { return positive_frames_.size(); }

 private:
  infer::DecoderConfig config(double threshold) const;

  models::InferenceSettings settings_;
  std::size_t n_words_;
  std::vector<std::vector<infer::PosteriorFrame>> positive_frames_;
  std::vector<infer::PosteriorFrame> negative_frames_;
  double negative_hours_ = 0.0;
};

std::vector<RocPoint> wake_roc(const infer::Classifier& classifier,
                               const models::InferenceSettings& settings, std::size_t n_words,
                               const std::vector<audio::AudioClip>& positives,
                               const std::vector<audio::AudioClip>& negatives,
                               const std::vector<double>& thresholds);

struct OperatingPoint {
  RocPoint point;
  bool within_budget = true;  // false: no point met the budget
};

/// Lowest FRR among points with FAR <= budget (ties: lower FAR, then lower
/// threshold). When none qualifies, the lowest-FAR point is returned and a
/// warning is logged.
OperatingPoint choose_operating_point(const std::vector<RocPoint>& roc, double far_budget_per_hour);

std::string roc_to_csv(const std::vector<RocPoint>& roc);

}  // namespace ww::eval
