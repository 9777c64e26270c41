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

#include "ww/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "ww/augment.hpp"
#include "ww/error.hpp"
#include "ww/random.hpp"

namespace ww::eval {

namespace fs = std::filesystem;

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw ConfigError("accuracy of an empty set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::vector<int> predict(const infer::Classifier& classifier,
                         const std::vector<Example>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  constexpr std::size_t kBatch = 16;
  for (std::size_t first = 0; first < examples.size(); first += kBatch) {
    std::vector<std::span<const float>> windows;
    for (std::size_t i = first; i < std::min(examples.size(), first + kBatch); ++i) {
      windows.push_back(examples[i].clip.view());
    }
    for (const auto& p : classifier.posteriors(windows)) {
      out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
  }
  return out;
}

std::map<std::string, double> commands_accuracy(
    const infer::Classifier& classifier,
    const std::map<std::string, std::vector<Example>>& splits) {
  std::map<std::string, double> out;
  for (const auto& [name, examples] : splits) {
    if (examples.empty()) throw ConfigError("commands accuracy: split '" + name + "' is empty");
    std::vector<int> truth;
    for (const auto& e : examples) truth.push_back(e.label);
    out[name] = accuracy(predict(classifier, examples), truth);
  }
  return out;
}

CommandsDataset build_commands_dataset(const std::vector<dataset::Sample>& samples,
                                       const std::vector<audio::AudioClip>& noise,
                                       const CommandsOptions& o) {
  if (o.targets.empty()) throw ConfigError("commands dataset: no target keywords");
  CommandsDataset ds;
  ds.labels = o.targets;
  ds.labels.push_back("unknown");
  ds.labels.push_back("silence");
  const int unknown = static_cast<int>(o.targets.size());
  const int silence = unknown + 1;
  const int sr = audio::kPipelineRate;
  const std::size_t n = static_cast<std::size_t>(std::llround(o.clip_s * sr));

  struct Pick {
    uint64_t key;
    const dataset::Sample* sample;
    int label;
  };
  std::map<std::pair<dataset::Split, int>, std::vector<Pick>> groups;
  for (const auto& s : samples) {
    const auto it = std::find(o.targets.begin(), o.targets.end(), s.transcript);
    const int label = it == o.targets.end() ? unknown : static_cast<int>(it - o.targets.begin());
    const auto split = s.split ? *s.split : dataset::speaker_split(s.speaker_id, o.seed, o.split_ratios);
    const uint64_t key = derive_seed(o.seed, dataset::fnv1a64(s.audio_path.generic_string()));
    groups[{split, label}].push_back({key, &s, label});
  }

  std::map<dataset::Split, std::size_t> target_counts;
  for (auto& [group, picks] : groups) {
    std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
      return a.key != b.key ? a.key < b.key
                            : a.sample->audio_path < b.sample->audio_path;
    });
    if (o.max_per_class > 0 && picks.size() > o.max_per_class) picks.resize(o.max_per_class);
    if (group.second < unknown) target_counts[group.first] += picks.size();
    auto& out = ds.splits[group.first];
    for (const auto& p : picks) {
      auto clip = audio::load_wav(p.sample->audio_path);
      clip = augment::fit_length(audio::resample(clip, sr), n);
      out.push_back({std::move(clip), p.label});
    }
  }

  for (const dataset::Split split :
       {dataset::Split::kTrain, dataset::Split::kDev, dataset::Split::kTest}) {
    if (!ds.splits.contains(split)) continue;
    const double mean_target =
        static_cast<double>(target_counts[split]) / static_cast<double>(o.targets.size());
    const auto count = static_cast<std::size_t>(std::llround(o.silence_ratio * mean_target));
    if (count > 0 && noise.empty()) {
      spdlog::warn("no background noise clips; silence examples are digital zeros");
    }
    auto& out = ds.splits[split];
    for (std::size_t k = 0; k < count; ++k) {
      Rng rng(derive_seed(o.seed, 0x511e + static_cast<uint64_t>(split), k));
      std::vector<float> cut(n, 0.0f);
      if (!noise.empty()) {
        const auto& src = noise[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int64_t>(noise.size()) - 1))];
        const double gain = rng.uniform();
        const auto max_start =
            src.size() > n ? static_cast<int64_t>(src.size() - n) : int64_t{0};
        const auto start = static_cast<std::size_t>(rng.uniform_int(0, max_start));
        for (std::size_t i = 0; i < n && start + i < src.size(); ++i) {
          cut[i] = static_cast<float>(gain * src.samples()[start + i]);
        }
      }
      out.push_back({audio::AudioClip(std::move(cut), sr), silence});
    }
  }
  return ds;
}

CommandsDataset load_commands_dataset(const fs::path& root, const CommandsOptions& options) {
  auto ingest = dataset::ingest_speech_commands(root);
  std::vector<audio::AudioClip> noise;
  const fs::path noise_dir = root / "_background_noise_";
  if (fs::is_directory(noise_dir)) {
    const auto pool = augment::NoisePool::from_directory(noise_dir);
    for (std::size_t i = 0; i < pool.size(); ++i) noise.push_back(pool[i]);
  }
  return build_commands_dataset(ingest.samples, noise, options);
}

void to_json(nlohmann::json& j, const RocPoint& p) {
  j = nlohmann::json{
      {"threshold", p.threshold}, {"far_per_hour", p.far_per_hour}, {"frr", p.frr}};
}

std::vector<double> threshold_grid(std::size_t n) {
  if (n < 2) throw ConfigError("threshold grid needs at least 2 points");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

WakeEvaluation::WakeEvaluation(const infer::Classifier& classifier,
                               const models::InferenceSettings& settings, std::size_t n_words,
                               const std::vector<audio::AudioClip>& positives,
                               const std::vector<audio::AudioClip>& negatives)
    : settings_(settings), n_words_(n_words) {
  const int sr = classifier.frontend().config().sample_rate;
  if (positives.empty()) throw ConfigError("wake evaluation: no positive clips");
  const auto lead = static_cast<std::size_t>(std::llround(settings.window_s * sr));
  const auto tail = static_cast<std::size_t>(sr / 2);
  for (const auto& clip : positives) {
    if (clip.sample_rate() != sr) throw ConfigError("wake evaluation: positive clip rate mismatch");
    std::vector<float> padded(lead, 0.0f);
    padded.insert(padded.end(), clip.samples().begin(), clip.samples().end());
    padded.resize(padded.size() + tail, 0.0f);
    positive_frames_.push_back(infer::smooth(
        infer::offline_posteriors(classifier, padded, settings.window_s, settings.stride_s, sr),
        settings.smoothing));
  }
  std::vector<float> stream;
  for (const auto& clip : negatives) {
    if (clip.sample_rate() != sr) throw ConfigError("wake evaluation: negative clip rate mismatch");
    stream.insert(stream.end(), clip.samples().begin(), clip.samples().end());
  }
  negative_hours_ = static_cast<double>(stream.size()) / sr / 3600.0;
  if (!(negative_hours_ > 0.0)) throw ConfigError("wake evaluation: negative stream is empty");
  negative_frames_ = infer::smooth(
      infer::offline_posteriors(classifier, stream, settings.window_s, settings.stride_s, sr),
      settings.smoothing);
}

infer::DecoderConfig WakeEvaluation::config(double threshold) const {
  return {n_words_, threshold, settings_.tau_s, settings_.refractory_s};
}

RocPoint WakeEvaluation::at(double threshold) const {
  const auto cfg = config(threshold);
  std::size_t rejected = 0;
  for (const auto& frames : positive_frames_) rejected += infer::decode(frames, cfg).empty();
  const auto alarms = infer::decode(negative_frames_, cfg).size();
  return {threshold, static_cast<double>(alarms) / negative_hours_,
          static_cast<double>(rejected) / static_cast<double>(positive_frames_.size())};
}

std::vector<RocPoint> WakeEvaluation::roc(const std::vector<double>& thresholds) const {
  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());
  std::vector<RocPoint> out;
  for (double t : sorted) out.push_back(at(t));
  return out;
}

std::vector<RocPoint> wake_roc(const infer::Classifier& classifier,
                               const models::InferenceSettings& settings, std::size_t n_words,
                               const std::vector<audio::AudioClip>& positives,
                               const std::vector<audio::AudioClip>& negatives,
                               const std::vector<double>& thresholds) {
  return WakeEvaluation(classifier, settings, n_words, positives, negatives).roc(thresholds);
}

OperatingPoint choose_operating_point(const std::vector<RocPoint>& roc,
                                      double far_budget_per_hour) {
  if (roc.empty()) throw ConfigError("operating point: empty ROC");
  const RocPoint* best = nullptr;
  for (const auto& p : roc) {
    if (p.far_per_hour > far_budget_per_hour) continue;
    if (best == nullptr || p.frr < best->frr ||
        (p.frr == best->frr && p.far_per_hour < best->far_per_hour)) {
      best = &p;
    }
  }
  if (best != nullptr) return {*best, true};
  const auto lowest = std::min_element(roc.begin(), roc.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.far_per_hour != b.far_per_hour ? a.far_per_hour < b.far_per_hour : a.frr < b.frr;
  });
  spdlog::warn("no ROC point within {} false alarms/hour; using the lowest ({:.3f}/hour)",
               far_budget_per_hour, lowest->far_per_hour);
  return {*lowest, false};
}

std::string roc_to_csv(const std::vector<RocPoint>& roc) {
  std::string out = "threshold,far_per_hour,frr\n";
  for (const auto& p : roc) {
    out += fmt::format("{:.6f},{:.6f},{:.6f}\n", p.threshold, p.far_per_hour, p.frr);
  }
  return out;
}

}  // namespace ww::eval
