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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ww/augment.hpp"
#include "ww/bundle.hpp"
#include "ww/dataset.hpp"
#include "ww/eval.hpp"
#include "ww/infer.hpp"
#include "ww/models.hpp"
#include "ww/tensor.hpp"

namespace ww::train {

using eval::Example;

struct WindowOptions {
  double window_s = 2.0;
  double jitter_s = 0.2;
  double negative_stride_s = 1.0;
  uint64_t seed = 0;
};

/// Training windows for one split of a wake-word dataset: one window per
/// aligned vocabulary word in the positives, tiled windows over the
/// negatives. Audio is resampled to the pipeline rate. Positives without
/// alignments are skipped with a warning.
std::vector<Example> wake_examples(const dataset::WakeWordDataset& ds, dataset::Split split,
                                   const WindowOptions& options);

/// Loads the split's clips (resampled) for streaming evaluation.
struct WakeClips {
  std::vector<audio::AudioClip> positives;
  std::vector<audio::AudioClip> negatives;
};
WakeClips wake_clips(const dataset::WakeWordDataset& ds, dataset::Split split);

/// Positive:negative item ratio per batch; zero disables balancing.
struct Balance {
  int positive = 1;
  int negative = 3;
  bool enabled() const { return positive > 0 && negative > 0; }
};

/// "1:3" -> {1, 3}; "none" or "0" -> disabled.
Balance parse_balance(const std::string& text);

struct Batch {
  nn::Tensor<float> inputs;  // [B, 1, T, M]
  std::vector<int> labels;
  std::vector<std::size_t> items;  // example indices
};

/// Deterministic batch schedule. The plan for an epoch depends only on
/// (seed, epoch), so training can resume without saved sampler state.
/// With balancing, each batch holds round(B * p / (p + n)) positives and the
/// rest negatives; an epoch covers every negative once and cycles the
/// positives. Without it, an epoch is one shuffled pass over all examples.
class BatchMaker {
 public:
  BatchMaker(const std::vector<Example>& examples, int negative_label,
             const features::Frontend& frontend, const augment::Augmenter* augmenter,
             std::size_t batch_size, Balance balance, uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch_plan(std::size_t epoch) const;
  Batch make(const std::vector<std::size_t>& items, std::size_t epoch,
             std::size_t batch_index) const;
  /// Unaugmented normalized features stacked into a batch.
  Batch make_clean(const std::vector<std::size_t>& items) const;

  std::size_t positives_per_batch() const { return pos_per_batch_; }

 private:
  Batch stack(std::vector<features::MelFrameMatrix> feats, const std::vector<std::size_t>& items) const;

  const std::vector<Example>* examples_;
  const features::Frontend* frontend_;
  const augment::Augmenter* augmenter_;
  std::size_t batch_size_;
  Balance balance_;
  uint64_t seed_;
  std::vector<std::size_t> positives_;
  std::vector<std::size_t> negatives_;
  std::size_t pos_per_batch_ = 0;
};

struct TrainConfig {
  std::string optimizer = "adam";  // adam | sgd
  double lr = 1e-3;
  double momentum = 0.9;  // sgd only
  double weight_decay = 0.0;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  std::string schedule = "cosine";  // cosine | constant
  Balance balance;
  uint64_t seed = 0;
  bool augment = true;
  /// Stop once eval-mode accuracy on the clean training windows reaches this
  /// value (0 disables the check).
  double stop_train_accuracy = 0.0;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Learning rate for `epoch` (0-based): cosine runs lr * (1 + cos(pi e / E)) / 2.
double scheduled_lr(const TrainConfig& config, std::size_t epoch);

/// Scores a classifier on held-out data.
struct DevMetric {
  std::string name = "dev_accuracy";
  bool higher_is_better = true;
  std::function<double(const infer::Classifier&)> fn;
};

/// Window accuracy on `dev`.
DevMetric accuracy_metric(std::vector<Example> dev);
/// FRR at the operating point chosen for `far_budget` false alarms per hour.
DevMetric wake_frr_metric(WakeClips dev, models::InferenceSettings settings, std::size_t n_words,
                          double far_budget, std::size_t thresholds);

struct TrainTask {
  std::vector<Example> train;
  int negative_label = -1;  // < 0: no positive/negative distinction
  models::Res8Config model;
  features::FrontendConfig frontend;
  augment::Policy policy;
  std::shared_ptr<const augment::NoisePool> noise;
  std::string task = "wake";
  std::vector<std::string> labels;
  std::vector<std::string> vocabulary;
  models::InferenceSettings inference;
  std::optional<DevMetric> dev;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> train_accuracy;
  std::optional<double> dev_metric;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_score = 0.0;
  bool stopped_early = false;
  std::filesystem::path best_bundle;
  std::filesystem::path last_checkpoint;
};

/// Runs training and writes `out_dir/ckpt-<epoch>.bundle`, `best.bundle` and
/// `train_log.jsonl`. Normalization stats are fitted on the clean training
/// windows. With `resume`, model, optimizer and log are restored from that
/// checkpoint and training continues with the following epoch.
TrainResult train(const TrainTask& task, const TrainConfig& config,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

features::DatasetStats fit_example_stats(const std::vector<Example>& examples,
                                         const features::FrontendConfig& frontend);

}  // namespace ww::train
