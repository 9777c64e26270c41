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

#include "ww/augment.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ww/error.hpp"
#include "ww/random.hpp"

namespace ww::augment {

using audio::AudioClip;
using features::Matrix;
using features::MelFrameMatrix;

namespace {

std::vector<float> clamped(std::vector<float> v) {
  for (float& x : v) x = std::clamp(x, -1.0f, 1.0f);
  return v;
}

}  // namespace

AudioClip time_stretch(const AudioClip& clip, double rate) {
  if (!(rate >= 0.5 && rate <= 2.0)) {
    throw ConfigError("time_stretch: rate " + std::to_string(rate) +
                      " outside [0.5, 2.0]");
  }
  if (rate == 1.0) return clip;
  const auto out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(clip.size()) / rate));
  return AudioClip(clamped(audio::sinc_interpolate(clip.view(), rate, out_len)),
                   clip.sample_rate());
}

AudioClip time_shift(const AudioClip& clip, double shift_s) {
  if (std::abs(shift_s) > clip.duration_seconds()) {
    throw ConfigError("time_shift: |shift| exceeds clip duration");
  }
  const auto shift = std::llround(shift_s * clip.sample_rate());
  if (shift == 0) return clip;
  const auto n = static_cast<long long>(clip.size());
  std::vector<float> out(clip.size(), 0.0f);
  const auto& in = clip.samples();
  for (long long i = 0; i < n; ++i) {
    const long long src = i - shift;
    if (src >= 0 && src < n) out[static_cast<std::size_t>(i)] = in[static_cast<std::size_t>(src)];
  }
  return AudioClip(std::move(out), clip.sample_rate());
}

AudioClip add_synthetic_noise(const AudioClip& clip, NoiseKind kind, double strength,
                              uint64_t seed) {
  if (strength < 0.0) throw ConfigError("synthetic noise: strength must be >= 0");
  if (strength == 0.0) return clip;
  Rng rng(seed);
  std::vector<float> out = clip.samples();
  if (kind == NoiseKind::kWhite) {
    for (float& x : out) x = static_cast<float>(x + strength * rng.normal());
  } else {
    const double p = std::min(strength, 1.0);
    for (float& x : out) {
      if (rng.bernoulli(p)) x = rng.bernoulli(0.5) ? 1.0f : -1.0f;
    }
  }
  return AudioClip(clamped(std::move(out)), clip.sample_rate());
}

MixResult mix_noise(const AudioClip& clip, const AudioClip& noise, double snr_db,
                    uint64_t seed) {
  if (clip.sample_rate() != noise.sample_rate()) {
    throw ConfigError("mix_noise: clip and noise sample rates differ (" +
                      std::to_string(clip.sample_rate()) + " vs " +
                      std::to_string(noise.sample_rate()) + ")");
  }
  MixResult result;
  if (noise.empty() || clip.empty()) {
    result.clip = clip;
    result.silent_noise = noise.empty();
    return result;
  }
  Rng rng(seed);
  const std::size_t n = clip.size();
  const std::size_t m = noise.size();
  const std::size_t max_offset = m > n ? m - n : m - 1;
  result.offset = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int64_t>(max_offset)));
  std::vector<float> segment(n);
  for (std::size_t i = 0; i < n; ++i) segment[i] = noise.samples()[(result.offset + i) % m];

  const double noise_rms = audio::rms(segment);
  if (noise_rms == 0.0) {
    result.clip = clip;
    result.silent_noise = true;
    return result;
  }
  const double clip_rms = audio::rms(clip.view());
  if (clip_rms == 0.0) {
    result.silent_clip = true;
    result.gain = kSilentClipNoiseRms / noise_rms;
  } else {
    result.gain = clip_rms / (noise_rms * std::pow(10.0, snr_db / 20.0));
  }
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(clip.samples()[i] + result.gain * segment[i]);
  }
  result.clip = AudioClip(clamped(std::move(out)), clip.sample_rate());
  return result;
}

std::vector<Mask> draw_spec_augment_masks(std::size_t frames, std::size_t bands,
                                          int n_freq_masks, std::size_t max_freq_width,
                                          int n_time_masks, std::size_t max_time_width,
                                          uint64_t seed) {
  if (max_freq_width >= bands) {
    throw ConfigError("spec_augment: max frequency mask width " +
                      std::to_string(max_freq_width) + " must be below the band count " +
                      std::to_string(bands));
  }
  if (max_time_width >= frames) {
    throw ConfigError("spec_augment: max time mask width " + std::to_string(max_time_width) +
                      " must be below the frame count " + std::to_string(frames));
  }
  Rng rng(seed);
  std::vector<Mask> masks;
  auto draw = [&](bool freq, std::size_t limit, std::size_t max_width) {
    const auto width =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int64_t>(max_width)));
    const auto start =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int64_t>(limit - width)));
    masks.push_back({freq, start, width});
  };
  for (int i = 0; i < n_freq_masks; ++i) draw(true, bands, max_freq_width);
  for (int i = 0; i < n_time_masks; ++i) draw(false, frames, max_time_width);
  return masks;
}

MelFrameMatrix apply_masks(const MelFrameMatrix& m, const std::vector<Mask>& masks) {
  MelFrameMatrix out = m;
  if (masks.empty()) return out;
  auto& f = out.frames;
  double mean = 0.0;
  for (double x : m.frames.data) mean += x;
  mean /= static_cast<double>(std::max<std::size_t>(1, m.frames.data.size()));
  for (const auto& mask : masks) {
    if (mask.frequency) {
      for (std::size_t t = 0; t < f.rows; ++t)
        for (std::size_t b = mask.start; b < std::min(f.cols, mask.start + mask.width); ++b)
          f(t, b) = mean;
    } else {
      for (std::size_t t = mask.start; t < std::min(f.rows, mask.start + mask.width); ++t)
        for (std::size_t b = 0; b < f.cols; ++b) f(t, b) = mean;
    }
  }
  return out;
}

MelFrameMatrix spec_augment(const MelFrameMatrix& m, int n_freq_masks,
                            std::size_t max_freq_width, int n_time_masks,
                            std::size_t max_time_width, uint64_t seed) {
  return apply_masks(m, draw_spec_augment_masks(m.num_frames(), m.mel_bands(), n_freq_masks,
                                                max_freq_width, n_time_masks, max_time_width,
                                                seed));
}

double vtlp_warp(double k, double last_bin, double alpha, double f_hi_ratio) {
  const double boundary = f_hi_ratio * last_bin * std::min(alpha, 1.0) / alpha;
  if (k <= boundary) return alpha * k;
  return last_bin - (last_bin - alpha * boundary) / (last_bin - boundary) * (last_bin - k);
}

Matrix vtlp(const Matrix& power, double alpha, double f_hi_ratio) {
  if (!(alpha >= 0.9 && alpha <= 1.1)) {
    throw ConfigError("vtlp: alpha " + std::to_string(alpha) + " outside [0.9, 1.1]");
  }
  if (!(f_hi_ratio > 0.0 && f_hi_ratio < 1.0)) {
    throw ConfigError("vtlp: boundary ratio must be in (0, 1)");
  }
  if (alpha == 1.0 || power.cols < 2) return power;
  const std::size_t bins = power.cols;
  const double last = static_cast<double>(bins - 1);
  // Per-bin destination and split weight are shared by all frames.
  std::vector<std::size_t> lo(bins);
  std::vector<double> frac(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double p = std::clamp(vtlp_warp(static_cast<double>(k), last, alpha, f_hi_ratio),
                                0.0, last);
    lo[k] = static_cast<std::size_t>(std::floor(p));
    frac[k] = p - static_cast<double>(lo[k]);
    if (lo[k] == bins - 1) frac[k] = 0.0;
  }
  Matrix out(power.rows, bins);
  for (std::size_t t = 0; t < power.rows; ++t) {
    const auto in = power.row(t);
    auto dst = out.row(t);
    for (std::size_t k = 0; k < bins; ++k) {
      dst[lo[k]] += (1.0 - frac[k]) * in[k];
      if (frac[k] > 0.0) dst[lo[k] + 1] += frac[k] * in[k];
    }
  }
  return out;
}

Domain domain_of(Kind k) {
  switch (k) {
    case Kind::kTimeShift:
    case Kind::kTimeStretch:
    case Kind::kSyntheticNoise:
    case Kind::kMixNoise:
      return Domain::kAudio;
    case Kind::kVtlp:
      return Domain::kSpectrum;
    case Kind::kSpecAugment:
      return Domain::kFeature;
  }
  return Domain::kAudio;
}

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::kTimeShift:
      return "time_shift";
    case Kind::kTimeStretch:
      return "time_stretch";
    case Kind::kSyntheticNoise:
      return "synthetic_noise";
    case Kind::kMixNoise:
      return "mix_noise";
    case Kind::kVtlp:
      return "vtlp";
    case Kind::kSpecAugment:
      return "spec_augment";
  }
  return "?";
}

namespace {

Kind kind_from_string(const std::string& s) {
  for (Kind k : {Kind::kTimeShift, Kind::kTimeStretch, Kind::kSyntheticNoise, Kind::kMixNoise,
                 Kind::kVtlp, Kind::kSpecAugment}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown augmentation '" + s + "'");
}

}  // namespace

Policy default_policy() {
  Policy p;
  p.push_back({.kind = Kind::kTimeShift, .probability = 0.5, .lo = -0.1, .hi = 0.1});
  p.push_back({.kind = Kind::kTimeStretch, .probability = 0.3, .lo = 0.85, .hi = 1.15});
  p.push_back({.kind = Kind::kSyntheticNoise, .probability = 0.1, .lo = 0.01, .hi = 0.01});
  p.push_back({.kind = Kind::kMixNoise, .probability = 0.75, .lo = 0.0, .hi = 20.0});
  p.push_back({.kind = Kind::kVtlp, .probability = 0.3, .lo = 0.9, .hi = 1.1});
  p.push_back({.kind = Kind::kSpecAugment, .probability = 1.0});
  return p;
}

nlohmann::json policy_to_json(const Policy& p) {
  auto arr = nlohmann::json::array();
  for (const auto& s : p) {
    nlohmann::json j{{"kind", to_string(s.kind)},
                     {"probability", s.probability},
                     {"range", {s.lo, s.hi}}};
    if (s.kind == Kind::kSyntheticNoise) {
      j["noise"] = s.noise == NoiseKind::kWhite ? "white" : "salt_pepper";
    } else if (s.kind == Kind::kSpecAugment) {
      j["freq_masks"] = s.n_freq_masks;
      j["freq_width"] = s.freq_width;
      j["time_masks"] = s.n_time_masks;
      j["time_width"] = s.time_width;
    } else if (s.kind == Kind::kVtlp) {
      j["f_hi_ratio"] = s.f_hi_ratio;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

Policy policy_from_json(const nlohmann::json& j) {
  Policy p;
  try {
    for (const auto& e : j) {
      Step s;
      s.kind = kind_from_string(e.at("kind").get<std::string>());
      s.probability = e.at("probability").get<double>();
      if (e.contains("range")) {
        s.lo = e.at("range").at(0).get<double>();
        s.hi = e.at("range").at(1).get<double>();
      }
      if (e.contains("noise")) {
        const auto n = e.at("noise").get<std::string>();
        if (n == "white") {
          s.noise = NoiseKind::kWhite;
        } else if (n == "salt_pepper") {
          s.noise = NoiseKind::kSaltPepper;
        } else {
          throw ConfigError("unknown synthetic noise kind '" + n + "'");
        }
      }
      s.n_freq_masks = e.value("freq_masks", s.n_freq_masks);
      s.freq_width = e.value("freq_width", s.freq_width);
      s.n_time_masks = e.value("time_masks", s.n_time_masks);
      s.time_width = e.value("time_width", s.time_width);
      s.f_hi_ratio = e.value("f_hi_ratio", s.f_hi_ratio);
      p.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("augmentation policy: ") + e.what());
  }
  return p;
}

NoisePool NoisePool::from_directory(const std::filesystem::path& dir, int sample_rate) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("noise directory " + dir.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<AudioClip> clips;
  for (const auto& f : files) clips.push_back(audio::resample(audio::load_wav(f), sample_rate));
  spdlog::info("loaded {} noise clips from {}", clips.size(), dir.string());
  return NoisePool(std::move(clips));
}

Augmenter::Augmenter(Policy policy, uint64_t seed, std::shared_ptr<const NoisePool> noise)
    : policy_(std::move(policy)), seed_(seed), noise_(std::move(noise)) {}

AudioClip Augmenter::apply_audio(const AudioClip& clip, uint64_t index) const {
  AudioClip out = clip;
  for (std::size_t i = 0; i < policy_.size(); ++i) {
    const Step& s = policy_[i];
    if (domain_of(s.kind) != Domain::kAudio) continue;
    Rng rng(derive_seed(seed_, index, i));
    if (!rng.bernoulli(s.probability)) continue;
    const double value = rng.uniform(s.lo, s.hi);
    switch (s.kind) {
      case Kind::kTimeShift:
        out = time_shift(out, std::clamp(value, -out.duration_seconds(), out.duration_seconds()));
        break;
      case Kind::kTimeStretch:
        out = time_stretch(out, value);
        break;
      case Kind::kSyntheticNoise:
        out = add_synthetic_noise(out, s.noise, value, rng.next_u64());
        break;
      case Kind::kMixNoise: {
        if (!noise_ || noise_->empty()) break;
        const auto pick =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<int64_t>(noise_->size()) - 1));
        out = mix_noise(out, (*noise_)[pick], value, rng.next_u64()).clip;
        break;
      }
      default:
        break;
    }
  }
  return out;
}

Matrix Augmenter::apply_spectrum(const Matrix& power, uint64_t index) const {
  Matrix out = power;
  for (std::size_t i = 0; i < policy_.size(); ++i) {
    const Step& s = policy_[i];
    if (domain_of(s.kind) != Domain::kSpectrum) continue;
    Rng rng(derive_seed(seed_, index, i));
    if (!rng.bernoulli(s.probability)) continue;
    out = vtlp(out, rng.uniform(s.lo, s.hi), s.f_hi_ratio);
  }
  return out;
}

MelFrameMatrix Augmenter::apply_features(const MelFrameMatrix& m, uint64_t index) const {
  MelFrameMatrix out = m;
  for (std::size_t i = 0; i < policy_.size(); ++i) {
    const Step& s = policy_[i];
    if (domain_of(s.kind) != Domain::kFeature) continue;
    Rng rng(derive_seed(seed_, index, i));
    if (!rng.bernoulli(s.probability)) continue;
    out = spec_augment(out, s.n_freq_masks, s.freq_width, s.n_time_masks, s.time_width,
                       rng.next_u64());
  }
  return out;
}

AudioClip fit_length(const AudioClip& clip, std::size_t n) {
  if (clip.size() == n) return clip;
  std::vector<float> out(n, 0.0f);
  if (clip.size() > n) {
    const std::size_t off = (clip.size() - n) / 2;
    std::copy_n(clip.samples().begin() + static_cast<std::ptrdiff_t>(off), n, out.begin());
  } else {
    const std::size_t off = (n - clip.size()) / 2;
    std::copy(clip.samples().begin(), clip.samples().end(),
              out.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return AudioClip(std::move(out), clip.sample_rate());
}

MelFrameMatrix Augmenter::run(const AudioClip& clip, uint64_t index,
                              const features::Frontend& frontend) const {
  const AudioClip audio = fit_length(apply_audio(clip, index), clip.size());
  const Matrix power = apply_spectrum(frontend.power(audio.view()), index);
  return apply_features(frontend.normalize(frontend.log_mel_from_power(power)), index);
}

Augmenter compose(Policy policy, uint64_t seed, std::shared_ptr<const NoisePool> noise) {
  Domain last = Domain::kAudio;
  for (const auto& s : policy) {
    if (!(s.probability >= 0.0 && s.probability <= 1.0)) {
      throw ConfigError("augmentation '" + std::string(to_string(s.kind)) +
                        "': probability must be in [0, 1]");
    }
    if (s.lo > s.hi) {
      throw ConfigError("augmentation '" + std::string(to_string(s.kind)) +
                        "': empty parameter range");
    }
    const Domain d = domain_of(s.kind);
    if (d < last) {
      throw ConfigError("augmentation '" + std::string(to_string(s.kind)) +
                        "' is ordered after a later-stage augmentation; audio steps must "
                        "precede spectrum steps, which precede feature steps");
    }
    last = d;
  }
  return Augmenter(std::move(policy), seed, std::move(noise));
}

}  // namespace ww::augment
