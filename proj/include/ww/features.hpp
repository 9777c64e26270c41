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

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ww/audio.hpp"

namespace ww::features {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

struct FrontendConfig {
  int sample_rate = audio::kPipelineRate;
  std::size_t win = 480;       // 30 ms
  std::size_t hop = 160;       // 10 ms
  std::size_t fft_size = 512;
  std::size_t mel_bands = 40;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-7;
  bool per_band_stats = false;

  /// Number of frames produced for `n` samples (n >= win).
  std::size_t frames_for(std::size_t n) const { return 1 + (n - win) / hop; }

  bool operator==(const FrontendConfig&) const = default;
};

void to_json(nlohmann::json& j, const FrontendConfig& c);
void from_json(const nlohmann::json& j, FrontendConfig& c);

/// Time x mel-band matrix of log-Mel values.
struct MelFrameMatrix {
  Matrix frames;  // T x M
  double frame_hop_s = 0.0;
  double frame_len_s = 0.0;

  std::size_t num_frames() const { return frames.rows; }
  std::size_t mel_bands() const { return frames.cols; }
};

/// Normalization constants fitted on the training split. When the frontend
/// asks for per-band statistics, `band_mean`/`band_std` hold one entry per
/// mel band and take precedence over the global pair.
struct DatasetStats {
  double mean = 0.0;
  double std = 1.0;
  std::size_t count = 0;
  std::vector<double> band_mean;
  std::vector<double> band_std;

  bool per_band() const { return !band_mean.empty(); }
};

void to_json(nlohmann::json& j, const DatasetStats& s);
void from_json(const nlohmann::json& j, DatasetStats& s);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// |DFT_k|^2 of each Hann-windowed frame, zero-padded to fft_size.
/// Result is T x (fft_size/2 + 1).
Matrix stft_power(std::span<const float> samples, std::size_t win, std::size_t hop,
                  std::size_t fft_size);
Matrix stft_power(const audio::AudioClip& clip, std::size_t win, std::size_t hop,
                  std::size_t fft_size);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Triangular filters (rows) over the FFT bins (columns), centers uniform in
/// mel between f_min and f_max.
Matrix mel_filterbank(std::size_t fft_size, int sample_rate, std::size_t mel_bands,
                      double f_min, double f_max);

/// ln(max(filterbank . power, floor)) per frame. `power` is T x (fft/2+1).
MelFrameMatrix power_to_log_mel(const Matrix& power, const FrontendConfig& config);

MelFrameMatrix log_mel(const audio::AudioClip& clip, const FrontendConfig& config);

/// Running accumulator behind fit_stats; partial accumulators merge, so
/// callers can sum disjoint shards in parallel.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(std::size_t bands = 0) : band_acc_(bands) {}

  void add(const MelFrameMatrix& m);
  void merge(const StatsAccumulator& other);
  DatasetStats finish() const;

 private:
  struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x);
    void merge(const Moments& o);
  };
  Moments global_;
  std::vector<Moments> band_acc_;
  std::size_t frames_ = 0;
};

/// Global scalar mean and population standard deviation over every entry.
DatasetStats fit_stats(std::span<const MelFrameMatrix> matrices, bool per_band = false);

MelFrameMatrix normalize(const MelFrameMatrix& m, const DatasetStats& stats);
MelFrameMatrix denormalize(const MelFrameMatrix& m, const DatasetStats& stats);

/// Frontend plus stats: clip -> normalized log-Mel.
class Frontend {
 public:
  Frontend(FrontendConfig config, DatasetStats stats);

  const FrontendConfig& config() const { return config_; }
  const DatasetStats& stats() const { return stats_; }
  const Matrix& filterbank() const { return filterbank_; }

  /// Normalized log-Mel of `samples`.
  MelFrameMatrix operator()(std::span<const float> samples) const;

  Matrix power(std::span<const float> samples) const;
  // Unnormalized log-Mel from a power spectrogram.
  MelFrameMatrix log_mel_from_power(const Matrix& power) const;
  MelFrameMatrix normalize(const MelFrameMatrix& m) const;

 private:
  FrontendConfig config_;
  DatasetStats stats_;
  Matrix filterbank_;
};

}  // namespace ww::features
