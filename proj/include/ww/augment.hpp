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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ww/audio.hpp"
#include "ww/features.hpp"

namespace ww::augment {

/// Plain interpolation; rate > 1 shortens the clip and raises pitch.
/// Output length is round(len / rate). rate must lie in [0.5, 2].
audio::AudioClip time_stretch(const audio::AudioClip& clip, double rate);

/// Delays (positive) or advances (negative) the content; the vacated region
/// is zero-filled and nothing wraps around.
audio::AudioClip time_shift(const audio::AudioClip& clip, double shift_s);

enum class NoiseKind { kWhite, kSaltPepper };

/// White: adds N(0, strength^2) per sample. Salt and pepper: with
/// probability `strength` a sample becomes +1 or -1. Output is clamped.
audio::AudioClip add_synthetic_noise(const audio::AudioClip& clip, NoiseKind kind,
                                     double strength, uint64_t seed);

struct MixResult {
  audio::AudioClip clip;
  double gain = 0.0;         // applied to the noise segment
  std::size_t offset = 0;    // start of the segment within the (tiled) noise
  bool silent_clip = false;  // clip rms was 0: noise returned at reference rms
  bool silent_noise = false; // noise rms was 0: clip returned unchanged
};

/// Reference rms used when the clip itself is silent.
inline constexpr double kSilentClipNoiseRms = 0.05;

/// Adds a noise segment (random offset, tiled when the noise is shorter)
/// scaled to reach `snr_db` relative to the clip, then clamps to [-1, 1].
MixResult mix_noise(const audio::AudioClip& clip, const audio::AudioClip& noise,
                    double snr_db, uint64_t seed);

struct Mask {
  bool frequency = false;  // true: mel-band range, false: frame range
  std::size_t start = 0;
  std::size_t width = 0;
};

/// Mask widths are uniform on {0..max_freq_width} / {0..max_time_width}; the
/// start is uniform over the positions where the mask fits.
std::vector<Mask> draw_spec_augment_masks(std::size_t frames, std::size_t bands,
                                          int n_freq_masks, std::size_t max_freq_width,
                                          int n_time_masks, std::size_t max_time_width,
                                          uint64_t seed);

/// Sets every masked cell to the mean of the input matrix.
features::MelFrameMatrix apply_masks(const features::MelFrameMatrix& m,
                                     const std::vector<Mask>& masks);

/// SpecAugment without time warping.
features::MelFrameMatrix spec_augment(const features::MelFrameMatrix& m, int n_freq_masks,
                                      std::size_t max_freq_width, int n_time_masks,
                                      std::size_t max_time_width, uint64_t seed);

/// Piecewise-linear frequency warp of a power spectrum (rows are frames,
/// columns are bins up to Nyquist). Below the boundary frequency
/// f_hi_ratio * Nyquist * min(alpha, 1) / alpha frequencies scale by alpha;
/// above it the map runs linearly to Nyquist. Each bin's energy is split
/// between the two bins adjacent to its warped position.
features::Matrix vtlp(const features::Matrix& power, double alpha, double f_hi_ratio = 0.8);

/// Warped position (in bins) of bin k for a spectrum with `last_bin` as Nyquist.
double vtlp_warp(double k, double last_bin, double alpha, double f_hi_ratio);

enum class Kind { kTimeShift, kTimeStretch, kSyntheticNoise, kMixNoise, kVtlp, kSpecAugment };

enum class Domain { kAudio, kSpectrum, kFeature };

Domain domain_of(Kind k);
std::string_view to_string(Kind k);

struct Step {
  Kind kind = Kind::kTimeShift;
  double probability = 0.0;
  double lo = 0.0;  // parameter range, meaning depends on kind
  double hi = 0.0;
  // Synthetic noise only.
  NoiseKind noise = NoiseKind::kWhite;
  // SpecAugment only: counts and maximum widths.
  int n_freq_masks = 2;
  std::size_t freq_width = 7;
  int n_time_masks = 2;
  std::size_t time_width = 25;
  // VTLP boundary.
  double f_hi_ratio = 0.8;
};

using Policy = std::vector<Step>;

/// time_shift p=0.5 +-0.1 s; time_stretch p=0.3 [0.85, 1.15];
/// synthetic noise p=0.1 strength 0.01; mix_noise p=0.75 snr [0, 20] dB;
/// vtlp p=0.3 alpha [0.9, 1.1]; spec_augment p=1 (2 x F=7, 2 x T=25).
Policy default_policy();

nlohmann::json policy_to_json(const Policy& p);
Policy policy_from_json(const nlohmann::json& j);

/// Read-only pool of recorded noise clips.
class NoisePool {
 public:
  NoisePool() = default;
  explicit NoisePool(std::vector<audio::AudioClip> clips) : clips_(std::move(clips)) {}

  /// Recursively loads every .wav below `dir`, resampled to `sample_rate`.
  static NoisePool from_directory(const std::filesystem::path& dir,
                                  int sample_rate = audio::kPipelineRate);

  bool empty() const { return clips_.empty(); }
  std::size_t size() const { return clips_.size(); }
  const audio::AudioClip& operator[](std::size_t i) const { return clips_[i]; }

 private:
  std::vector<audio::AudioClip> clips_;
};

/// A policy bound to a seed. Every coin flip and parameter draw for sample
/// `index` comes from a stream derived from (seed, index, step), so results
/// do not depend on the order in which samples are processed.
class Augmenter {
 public:
  Augmenter(Policy policy, uint64_t seed, std::shared_ptr<const NoisePool> noise = nullptr);

  const Policy& policy() const { return policy_; }
  bool empty() const { return policy_.empty(); }

  audio::AudioClip apply_audio(const audio::AudioClip& clip, uint64_t index) const;
  features::Matrix apply_spectrum(const features::Matrix& power, uint64_t index) const;
  features::MelFrameMatrix apply_features(const features::MelFrameMatrix& m,
                                          uint64_t index) const;

  /// Full chain: audio steps, length restored to the input's (centered crop or
  /// pad), power spectrum, spectrum steps, log-Mel, normalization, feature
  /// steps.
  features::MelFrameMatrix run(const audio::AudioClip& clip, uint64_t index,
                               const features::Frontend& frontend) const;

 private:
  Policy policy_;
  uint64_t seed_;
  std::shared_ptr<const NoisePool> noise_;
};

/// Validates a policy and binds it: probabilities in [0, 1], domains ordered
/// audio -> spectrum -> feature.
Augmenter compose(Policy policy, uint64_t seed,
                  std::shared_ptr<const NoisePool> noise = nullptr);

/// Center crop or symmetric zero pad to exactly n samples.
audio::AudioClip fit_length(const audio::AudioClip& clip, std::size_t n);

}  // namespace ww::augment
