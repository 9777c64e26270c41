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
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ww/bundle.hpp"
#include "ww/features.hpp"
#include "ww/models.hpp"

namespace ww::infer {

/// Class probabilities for the window ending at time_s.
struct PosteriorFrame {
  double time_s = 0.0;
  std::vector<double> probs;

  bool operator==(const PosteriorFrame&) const = default;
};

struct DetectionEvent {
  double time_s = 0.0;
  double score = 0.0;
  std::vector<double> word_times;

  bool operator==(const DetectionEvent&) const = default;
};

void to_json(nlohmann::json& j, const DetectionEvent& e);

/// Frontend plus eval-mode model. Shareable across threads once built.
class Classifier {
 public:
  Classifier(models::Res8<float> model, features::Frontend frontend);
  static Classifier from_bundle(const models::ModelBundle& bundle);

  const features::Frontend& frontend() const { return frontend_; }
  std::size_t num_labels() const { return model_.config().n_labels; }

  /// Probabilities for one window of samples.
  std::vector<double> posteriors(std::span<const float> window) const;
  /// One probability row per window; all windows must share a length.
  std::vector<std::vector<double>> posteriors(
      const std::vector<std::span<const float>>& windows) const;

 private:
  mutable models::Res8<float> model_;
  features::Frontend frontend_;
};

/// Sliding-window posteriors over a sample stream. The first frame covers
/// samples [0, window) and is stamped at window_s; later frames follow every
/// stride. Output does not depend on how the stream is chunked.
class PosteriorStream {
 public:
  PosteriorStream(const Classifier& classifier, double window_s, double stride_s,
                  int sample_rate = audio::kPipelineRate);

  std::vector<PosteriorFrame> push(std::span<const float> samples);
  /// Checks the source rate, then pushes.
  std::vector<PosteriorFrame> push(const audio::AudioClip& chunk);

  std::size_t window_samples() const { return window_; }
  std::size_t stride_samples() const { return stride_; }

 private:
  const Classifier* classifier_;
  int sample_rate_;
  std::size_t window_;
  std::size_t stride_;
  std::deque<float> buffer_;  // samples [base_, base_ + size)
  uint64_t base_ = 0;
  uint64_t next_end_;  // stream position at which the next frame is due
};

/// All frames for a finished clip.
std::vector<PosteriorFrame> offline_posteriors(const Classifier& classifier,
                                               std::span<const float> samples,
                                               double window_s, double stride_s,
                                               int sample_rate = audio::kPipelineRate);

/// Mean of the last min(k, available) frames, renormalized to sum to one.
class Smoother {
 public:
  explicit Smoother(std::size_t k);
  PosteriorFrame push(const PosteriorFrame& frame);

 private:
  std::size_t k_;
  std::deque<std::vector<double>> recent_;
};

std::vector<PosteriorFrame> smooth(const std::vector<PosteriorFrame>& frames, std::size_t k);

struct DecoderConfig {
  std::size_t n_words = 1;  // probs[0..n_words) are the phrase words in order
  double threshold = 0.5;
  double tau_s = 1.5;
  double refractory_s = 1.0;
};

/// Word i triggers at a frame when its probability exceeds the threshold and
/// is the frame's argmax (first index on ties). An event fires when the last
/// word triggers and an in-order chain of triggers, strictly increasing in
/// time and spanning at most tau_s, ends there. Of the possible chains the
/// latest one is reported; the event score is the smallest probability on
/// it. After an event, triggers before time_s + refractory_s are ignored.
class PhraseDecoder {
 public:
  explicit PhraseDecoder(DecoderConfig config);
  std::optional<DetectionEvent> push(const PosteriorFrame& frame);
  const DecoderConfig& config() const { return config_; }

 private:
  struct Trigger {
    double time_s;
    std::size_t word;
    double prob;
  };

  DecoderConfig config_;
  std::vector<Trigger> history_;
  std::optional<double> suppress_until_;
};

std::vector<DetectionEvent> decode(const std::vector<PosteriorFrame>& smoothed,
                                   const DecoderConfig& config);

/// Stream -> posteriors -> smoothing -> phrase decoding.
class WakeDetector {
 public:
  WakeDetector(const Classifier& classifier, const models::InferenceSettings& settings,
               std::size_t n_words, int sample_rate = audio::kPipelineRate);

  std::vector<DetectionEvent> push(std::span<const float> samples);
  /// Frames seen so far (after smoothing), for inspection.
  const std::vector<PosteriorFrame>& frames() const { return frames_; }

 private:
  PosteriorStream stream_;
  Smoother smoother_;
  PhraseDecoder decoder_;
  std::vector<PosteriorFrame> frames_;
};

}  // namespace ww::infer
