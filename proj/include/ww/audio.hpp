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

#include <filesystem>
#include <span>
#include <vector>

namespace ww::audio {

/// Canonical pipeline sample rate. Ingestion resamples everything to it.
inline constexpr int kPipelineRate = 16000;

/// Mono PCM audio. Samples are finite; values read from disk lie in [-1, 1].
class AudioClip {
 public:
  AudioClip() = default;
  AudioClip(std::vector<float> samples, int sample_rate);

  static AudioClip silence(std::size_t n, int sample_rate) {
    return AudioClip(std::vector<float>(n, 0.0f), sample_rate);
  }

  const std::vector<float>& samples() const { return samples_; }
  std::span<const float> view() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double duration_seconds() const {
    return static_cast<double>(samples_.size()) / sample_rate_;
  }

  bool operator==(const AudioClip&) const = default;

 private:
  std::vector<float> samples_;
  int sample_rate_ = kPipelineRate;
};

/// Reads a RIFF/WAVE file holding PCM16 or IEEE float32 data with one or two
/// channels. Stereo is averaged to mono. PCM16 value v maps to v / 32768.
AudioClip load_wav(const std::filesystem::path& path);

/// Parses an in-memory WAV image (same rules as load_wav).
AudioClip parse_wav(std::span<const unsigned char> bytes,
                    const std::string& origin = "<memory>");

/// Writes 16-bit PCM mono, little-endian. Samples are clipped to [-1, 1].
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

std::vector<unsigned char> encode_wav(const AudioClip& clip);

/// Band-limited resampling with a Hann-windowed sinc, 32 taps per output
/// sample. Output length is round(len * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Resamples `in` by reading it at positions n * step for
/// n in [0, out_len). The low-pass cutoff is min(1, 1/step) of Nyquist.
std::vector<float> sinc_interpolate(std::span<const float> in, double step,
                                    std::size_t out_len);

/// Root-mean-square amplitude; 0 for an empty span.
double rms(std::span<const float> x);

}  // namespace ww::audio
