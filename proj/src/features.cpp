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

#include "ww/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "ww/error.hpp"

namespace ww::features {

void to_json(nlohmann::json& j, const FrontendConfig& c) {
  j = nlohmann::json{{"sample_rate", c.sample_rate}, {"win", c.win},
                     {"hop", c.hop},                 {"fft_size", c.fft_size},
                     {"mel_bands", c.mel_bands},     {"f_min", c.f_min},
                     {"f_max", c.f_max},             {"log_floor", c.log_floor},
                     {"per_band_stats", c.per_band_stats}};
}

void from_json(const nlohmann::json& j, FrontendConfig& c) {
  c.sample_rate = j.at("sample_rate").get<int>();
  c.win = j.at("win").get<std::size_t>();
  c.hop = j.at("hop").get<std::size_t>();
  c.fft_size = j.at("fft_size").get<std::size_t>();
  c.mel_bands = j.at("mel_bands").get<std::size_t>();
  c.f_min = j.at("f_min").get<double>();
  c.f_max = j.at("f_max").get<double>();
  c.log_floor = j.at("log_floor").get<double>();
  c.per_band_stats = j.value("per_band_stats", false);
}

void to_json(nlohmann::json& j, const DatasetStats& s) {
  j = nlohmann::json{{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
  if (s.per_band()) {
    j["band_mean"] = s.band_mean;
    j["band_std"] = s.band_std;
  }
}

void from_json(const nlohmann::json& j, DatasetStats& s) {
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.count = j.at("count").get<std::size_t>();
  s.band_mean = j.value("band_mean", std::vector<double>{});
  s.band_std = j.value("band_std", std::vector<double>{});
  if (!(s.std > 0.0)) throw FormatError("stats: std must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

namespace {

// One r2c plan per FFT size per thread. Planning itself is not thread safe
// in FFTW, so it happens under a process-wide lock.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    static std::mutex plan_mutex;
    std::lock_guard lock(plan_mutex);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void run() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

RealFft& fft_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

}  // namespace

Matrix stft_power(std::span<const float> samples, std::size_t win, std::size_t hop,
                  std::size_t fft_size) {
  if (win == 0 || win > fft_size) {
    throw ConfigError("stft: need 0 < win <= fft_size (win=" + std::to_string(win) +
                      ", fft=" + std::to_string(fft_size) + ")");
  }
  if (hop == 0) throw ConfigError("stft: hop must be >= 1");
  if (samples.size() < win) {
    throw DimensionError("stft: clip of " + std::to_string(samples.size()) +
                         " samples is shorter than the window (" +
                         std::to_string(win) + ")");
  }
  const std::size_t frames = 1 + (samples.size() - win) / hop;
  const std::size_t bins = fft_size / 2 + 1;
  const auto window = hann_window(win);
  Matrix out(frames, bins);
  RealFft& fft = fft_for(fft_size);
  double* in = fft.input();
  for (std::size_t t = 0; t < frames; ++t) {
    const float* frame = samples.data() + t * hop;
    for (std::size_t i = 0; i < win; ++i) in[i] = frame[i] * window[i];
    std::fill(in + win, in + fft_size, 0.0);
    fft.run();
    const fftw_complex* spec = fft.output();
    auto row = out.row(t);
    for (std::size_t k = 0; k < bins; ++k) {
      row[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
  }
  return out;
}

Matrix stft_power(const audio::AudioClip& clip, std::size_t win, std::size_t hop,
                  std::size_t fft_size) {
  return stft_power(clip.view(), win, hop, fft_size);
}

Matrix mel_filterbank(std::size_t fft_size, int sample_rate, std::size_t mel_bands,
                      double f_min, double f_max) {
  const double nyquist = sample_rate / 2.0;
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= nyquist)) {
    throw ConfigError("mel filterbank: need 0 <= f_min < f_max <= sample_rate/2");
  }
  if (mel_bands == 0) throw ConfigError("mel filterbank: mel_bands must be >= 1");
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(mel_bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(mel_bands + 1));
  }
  Matrix fb(mel_bands, bins);
  for (std::size_t m = 0; m < mel_bands; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      fb(m, k) = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw ConfigError("mel filterbank: band " + std::to_string(m) +
                        " covers no FFT bin; too many mel bands (" +
                        std::to_string(mel_bands) + ") for fft size " +
                        std::to_string(fft_size));
    }
  }
  return fb;
}

namespace {

MelFrameMatrix apply_filterbank(const Matrix& power, const Matrix& fb,
                                const FrontendConfig& config) {
  if (power.cols != fb.cols) {
    throw DimensionError("log-mel: power has " + std::to_string(power.cols) +
                         " bins, filterbank expects " + std::to_string(fb.cols));
  }
  MelFrameMatrix out;
  out.frames = Matrix(power.rows, fb.rows);
  out.frame_hop_s = static_cast<double>(config.hop) / config.sample_rate;
  out.frame_len_s = static_cast<double>(config.win) / config.sample_rate;
  for (std::size_t t = 0; t < power.rows; ++t) {
    const auto p = power.row(t);
    for (std::size_t m = 0; m < fb.rows; ++m) {
      const auto w = fb.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < fb.cols; ++k) acc += w[k] * p[k];
      out.frames(t, m) = std::log(std::max(acc, config.log_floor));
    }
  }
  return out;
}

Matrix filterbank_for(const FrontendConfig& c) {
  return mel_filterbank(c.fft_size, c.sample_rate, c.mel_bands, c.f_min, c.f_max);
}

}  // namespace

MelFrameMatrix power_to_log_mel(const Matrix& power, const FrontendConfig& config) {
  return apply_filterbank(power, filterbank_for(config), config);
}

MelFrameMatrix log_mel(const audio::AudioClip& clip, const FrontendConfig& config) {
  if (clip.sample_rate() != config.sample_rate) {
    throw ConfigError("log-mel: clip rate " + std::to_string(clip.sample_rate()) +
                      " differs from frontend rate " +
                      std::to_string(config.sample_rate));
  }
  return power_to_log_mel(stft_power(clip, config.win, config.hop, config.fft_size),
                          config);
}

void StatsAccumulator::Moments::add(double x) {
  ++n;
  const double delta = x - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (x - mean);
}

void StatsAccumulator::Moments::merge(const Moments& o) {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double total = static_cast<double>(n + o.n);
  const double delta = o.mean - mean;
  mean += delta * static_cast<double>(o.n) / total;
  m2 += o.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(o.n) / total;
  n += o.n;
}

void StatsAccumulator::add(const MelFrameMatrix& m) {
  const auto& f = m.frames;
  if (!band_acc_.empty() && f.cols != band_acc_.size()) {
    throw DimensionError("stats: matrix has " + std::to_string(f.cols) +
                         " bands, accumulator has " + std::to_string(band_acc_.size()));
  }
  for (std::size_t t = 0; t < f.rows; ++t) {
    for (std::size_t b = 0; b < f.cols; ++b) {
      const double x = f(t, b);
      global_.add(x);
      if (!band_acc_.empty()) band_acc_[b].add(x);
    }
  }
  frames_ += f.rows;
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  global_.merge(other.global_);
  if (band_acc_.size() != other.band_acc_.size()) {
    throw DimensionError("stats: cannot merge accumulators with different band counts");
  }
  for (std::size_t b = 0; b < band_acc_.size(); ++b) band_acc_[b].merge(other.band_acc_[b]);
  frames_ += other.frames_;
}

DatasetStats StatsAccumulator::finish() const {
  if (frames_ < 2) {
    throw ConfigError("stats: need at least 2 frames, got " + std::to_string(frames_));
  }
  DatasetStats s;
  s.count = frames_;
  s.mean = global_.mean;
  s.std = std::sqrt(global_.m2 / static_cast<double>(global_.n));
  if (!(s.std > 0.0)) throw ConfigError("stats: zero variance in training features");
  for (const auto& b : band_acc_) {
    const double sd = std::sqrt(b.m2 / static_cast<double>(b.n));
    if (!(sd > 0.0)) throw ConfigError("stats: zero variance in a mel band");
    s.band_mean.push_back(b.mean);
    s.band_std.push_back(sd);
  }
  return s;
}

DatasetStats fit_stats(std::span<const MelFrameMatrix> matrices, bool per_band) {
  const std::size_t bands =
      per_band && !matrices.empty() ? matrices.front().mel_bands() : 0;
  StatsAccumulator acc(bands);
  for (const auto& m : matrices) acc.add(m);
  return acc.finish();
}

MelFrameMatrix normalize(const MelFrameMatrix& m, const DatasetStats& stats) {
  MelFrameMatrix out = m;
  auto& f = out.frames;
  if (stats.per_band()) {
    if (stats.band_mean.size() != f.cols) {
      throw DimensionError("normalize: stats have " +
                           std::to_string(stats.band_mean.size()) +
                           " bands, matrix has " + std::to_string(f.cols));
    }
    for (std::size_t t = 0; t < f.rows; ++t)
      for (std::size_t b = 0; b < f.cols; ++b)
        f(t, b) = (f(t, b) - stats.band_mean[b]) / stats.band_std[b];
  } else {
    for (double& x : f.data) x = (x - stats.mean) / stats.std;
  }
  return out;
}

MelFrameMatrix denormalize(const MelFrameMatrix& m, const DatasetStats& stats) {
  MelFrameMatrix out = m;
  auto& f = out.frames;
  if (stats.per_band()) {
    for (std::size_t t = 0; t < f.rows; ++t)
      for (std::size_t b = 0; b < f.cols; ++b)
        f(t, b) = f(t, b) * stats.band_std[b] + stats.band_mean[b];
  } else {
    for (double& x : f.data) x = x * stats.std + stats.mean;
  }
  return out;
}

Frontend::Frontend(FrontendConfig config, DatasetStats stats)
    : config_(config), stats_(std::move(stats)), filterbank_(filterbank_for(config_)) {}

MelFrameMatrix Frontend::operator()(std::span<const float> samples) const {
  return normalize(log_mel_from_power(power(samples)));
}

Matrix Frontend::power(std::span<const float> samples) const {
  return stft_power(samples, config_.win, config_.hop, config_.fft_size);
}

MelFrameMatrix Frontend::log_mel_from_power(const Matrix& power) const {
  return apply_filterbank(power, filterbank_, config_);
}

MelFrameMatrix Frontend::normalize(const MelFrameMatrix& m) const {
  return features::normalize(m, stats_);
}

}  // namespace ww::features
