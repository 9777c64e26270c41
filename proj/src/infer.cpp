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

#include "ww/infer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ww/error.hpp"

namespace ww::infer {

void to_json(nlohmann::json& j, const DetectionEvent& e) {
  j = nlohmann::json{{"time_s", e.time_s}, {"score", e.score}, {"word_times", e.word_times}};
}

Classifier::Classifier(models::Res8<float> model, features::Frontend frontend)
    : model_(std::move(model)), frontend_(std::move(frontend)) {}

Classifier Classifier::from_bundle(const models::ModelBundle& bundle) {
  return Classifier(models::instantiate(bundle), features::Frontend(bundle.frontend, bundle.stats));
}

std::vector<double> Classifier::posteriors(std::span<const float> window) const {
  return posteriors(std::vector<std::span<const float>>{window}).front();
}

std::vector<std::vector<double>> Classifier::posteriors(
    const std::vector<std::span<const float>>& windows) const {
  if (windows.empty()) return {};
  std::vector<float> batch;
  std::size_t t = 0, m = 0;
  for (const auto& w : windows) {
    if (w.size() != windows.front().size()) {
      throw DimensionError("classifier: windows of " + std::to_string(w.size()) + " and " +
                           std::to_string(windows.front().size()) + " samples in one batch");
    }
    const auto feats = frontend_(w);
    t = feats.num_frames();
    m = feats.mel_bands();
    batch.insert(batch.end(), feats.frames.data.begin(), feats.frames.data.end());
  }
  nn::NoGradGuard no_grad;
  const nn::Tensor<float> x({windows.size(), 1, t, m}, std::move(batch));
  const auto logp = model_.forward(x, false);
  const std::size_t labels = logp.dim(1);
  std::vector<std::vector<double>> out(windows.size(), std::vector<double>(labels));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t c = 0; c < labels; ++c) {
      out[i][c] = std::exp(static_cast<double>(logp.data()[i * labels + c]));
    }
  }
  return out;
}

PosteriorStream::PosteriorStream(const Classifier& classifier, double window_s, double stride_s,
                                 int sample_rate)
    : classifier_(&classifier), sample_rate_(sample_rate) {
  if (!(window_s > 0.0) || !(stride_s > 0.0)) {
    throw ConfigError("posterior stream: window and stride must be positive");
  }
  if (sample_rate != classifier.frontend().config().sample_rate) {
    throw ConfigError("posterior stream: stream rate " + std::to_string(sample_rate) +
                      " Hz differs from the model's " +
                      std::to_string(classifier.frontend().config().sample_rate) + " Hz");
  }
  window_ = static_cast<std::size_t>(std::llround(window_s * sample_rate));
  stride_ = static_cast<std::size_t>(std::llround(stride_s * sample_rate));
  if (stride_ == 0) throw ConfigError("posterior stream: stride is shorter than one sample");
  if (window_ < classifier.frontend().config().win) {
    throw ConfigError("posterior stream: window shorter than one analysis frame");
  }
  next_end_ = window_;
}

std::vector<PosteriorFrame> PosteriorStream::push(const audio::AudioClip& chunk) {
  if (chunk.sample_rate() != sample_rate_) {
    throw ConfigError("posterior stream: chunk at " + std::to_string(chunk.sample_rate()) +
                      " Hz, stream expects " + std::to_string(sample_rate_) + " Hz");
  }
  return push(chunk.view());
}

std::vector<PosteriorFrame> PosteriorStream::push(std::span<const float> samples) {
  buffer_.insert(buffer_.end(), samples.begin(), samples.end());
  std::vector<PosteriorFrame> out;
  std::vector<float> window(window_);
  while (base_ + buffer_.size() >= next_end_) {
    const uint64_t start = next_end_ - window_;
    std::copy_n(buffer_.begin() + static_cast<std::ptrdiff_t>(start - base_), window_,
                window.begin());
    out.push_back({static_cast<double>(next_end_) / sample_rate_,
                   classifier_->posteriors(std::span<const float>(window))});
    next_end_ += stride_;
    // Keep only what later windows still need.
    const uint64_t keep_from = next_end_ - window_;
    if (keep_from > base_) {
      const auto drop = std::min<uint64_t>(keep_from - base_, buffer_.size());
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(drop));
      base_ += drop;
    }
  }
  return out;
}

std::vector<PosteriorFrame> offline_posteriors(const Classifier& classifier,
                                               std::span<const float> samples, double window_s,
                                               double stride_s, int sample_rate) {
  // Same framing as PosteriorStream, batched.
  PosteriorStream framing(classifier, window_s, stride_s, sample_rate);
  const std::size_t w = framing.window_samples();
  const std::size_t s = framing.stride_samples();
  std::vector<PosteriorFrame> out;
  if (samples.size() < w) return out;
  const std::size_t count = 1 + (samples.size() - w) / s;
  constexpr std::size_t kBatch = 16;
  for (std::size_t first = 0; first < count; first += kBatch) {
    std::vector<std::span<const float>> windows;
    for (std::size_t i = first; i < std::min(count, first + kBatch); ++i) {
      windows.push_back(samples.subspan(i * s, w));
    }
    auto probs = classifier.posteriors(windows);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const std::size_t end = (first + i) * s + w;
      out.push_back({static_cast<double>(end) / sample_rate, std::move(probs[i])});
    }
  }
  return out;
}

Smoother::Smoother(std::size_t k) : k_(k) {
  if (k == 0) throw ConfigError("smoothing window must be at least 1");
}

PosteriorFrame Smoother::push(const PosteriorFrame& frame) {
  recent_.push_back(frame.probs);
  if (recent_.size() > k_) recent_.pop_front();
  if (k_ == 1) return frame;
  std::vector<double> mean(frame.probs.size(), 0.0);
  for (const auto& p : recent_) {
    if (p.size() != mean.size()) throw DimensionError("smoother: frame width changed");
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
  }
  double total = 0.0;
  for (double v : mean) total += v;
  if (total > 0.0) {
    for (double& v : mean) v /= total;
  }
  return {frame.time_s, std::move(mean)};
}

std::vector<PosteriorFrame> smooth(const std::vector<PosteriorFrame>& frames, std::size_t k) {
  Smoother s(k);
  std::vector<PosteriorFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(s.push(f));
  return out;
}

namespace {
constexpr double kTimeTolerance = 1e-9;
}

PhraseDecoder::PhraseDecoder(DecoderConfig config) : config_(config) {
  if (config_.n_words == 0) throw ConfigError("decoder: empty phrase");
  if (config_.tau_s < 0.0 || config_.refractory_s < 0.0) {
    throw ConfigError("decoder: tau and refractory period must be nonnegative");
  }
}

std::optional<DetectionEvent> PhraseDecoder::push(const PosteriorFrame& frame) {
  const double t = frame.time_s;
  if (suppress_until_ && t < *suppress_until_) return std::nullopt;
  if (frame.probs.size() <= config_.n_words) {
    throw DimensionError("decoder: frame has " + std::to_string(frame.probs.size()) +
                         " classes for a " + std::to_string(config_.n_words) + "-word phrase");
  }
  const auto best = static_cast<std::size_t>(
      std::max_element(frame.probs.begin(), frame.probs.end()) - frame.probs.begin());
  if (best >= config_.n_words || !(frame.probs[best] > config_.threshold)) return std::nullopt;

  std::erase_if(history_, [&](const Trigger& tr) {
    return t - tr.time_s > config_.tau_s + kTimeTolerance;
  });

  if (best + 1 < config_.n_words) {
    history_.push_back({t, best, frame.probs[best]});
    return std::nullopt;
  }

  // Latest in-order chain ending here.
  std::vector<double> times(config_.n_words);
  double score = frame.probs[best];
  times.back() = t;
  double cursor = t;
  for (std::size_t w = config_.n_words - 1; w-- > 0;) {
    const Trigger* found = nullptr;
    for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
      if (it->word == w && it->time_s < cursor) {
        found = &*it;
        break;
      }
    }
    if (found == nullptr) return std::nullopt;
    times[w] = found->time_s;
    score = std::min(score, found->prob);
    cursor = found->time_s;
  }
  if (t - times.front() > config_.tau_s + kTimeTolerance) return std::nullopt;

  history_.clear();
  suppress_until_ = t + config_.refractory_s;
  return DetectionEvent{t, score, std::move(times)};
}

std::vector<DetectionEvent> decode(const std::vector<PosteriorFrame>& smoothed,
                                   const DecoderConfig& config) {
  PhraseDecoder d(config);
  std::vector<DetectionEvent> out;
  for (const auto& f : smoothed) {
    if (auto e = d.push(f)) out.push_back(std::move(*e));
  }
  return out;
}

WakeDetector::WakeDetector(const Classifier& classifier,
                           const models::InferenceSettings& settings, std::size_t n_words,
                           int sample_rate)
    : stream_(classifier, settings.window_s, settings.stride_s, sample_rate),
      smoother_(settings.smoothing),
      decoder_(DecoderConfig{n_words, settings.threshold, settings.tau_s, settings.refractory_s}) {}

std::vector<DetectionEvent> WakeDetector::push(std::span<const float> samples) {
  std::vector<DetectionEvent> events;
  for (const auto& f : stream_.push(samples)) {
    frames_.push_back(smoother_.push(f));
    if (auto e = decoder_.push(frames_.back())) events.push_back(std::move(*e));
  }
  return events;
}

}  // namespace ww::infer
