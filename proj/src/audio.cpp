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

#include "ww/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "ww/error.hpp"

namespace ww::audio {

AudioClip::AudioClip(std::vector<float> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) {
    throw ConfigError("sample rate must be positive, got " +
                      std::to_string(sample_rate_));
  }
  for (float s : samples_) {
    if (!std::isfinite(s)) throw FormatError("audio clip has non-finite sample");
  }
}

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

}  // namespace

AudioClip parse_wav(std::span<const unsigned char> bytes,
                    const std::string& origin) {
  auto fail = [&](const std::string& what) -> FormatError {
    return FormatError(origin + ": " + what);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || len > avail) throw fail("truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (len < 40) throw fail("truncated extensible fmt chunk");
        format = read_u16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Streams written without a final size often carry 0 or 0xFFFFFFFF.
      data_len = std::min<std::size_t>(len, avail);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (rate == 0) throw fail("sample rate is zero");
  if (channels < 1 || channels > 2) {
    throw UnsupportedError(origin + ": " + std::to_string(channels) +
                           " channels (only mono and stereo are supported)");
  }

  std::size_t bytes_per_sample = 0;
  if (format == kFormatPcm && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == kFormatFloat && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw UnsupportedError(origin + ": codec " + std::to_string(format) + " with " +
                           std::to_string(bits) + " bits per sample");
  }

  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n = data_len / frame_bytes;
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
      if (bytes_per_sample == 2) {
        acc += static_cast<int16_t>(read_u16(p)) / 32768.0;
      } else {
        const uint32_t bitsv = read_u32(p);
        float f;
        std::memcpy(&f, &bitsv, 4);
        if (!std::isfinite(f)) throw fail("non-finite float sample");
        acc += f;
      }
    }
    out[i] = static_cast<float>(acc / channels);
  }
  return AudioClip(std::move(out), static_cast<int>(rate));
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_wav(bytes, path.string());
}

std::vector<unsigned char> encode_wav(const AudioClip& clip) {
  const auto n = static_cast<uint32_t>(clip.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * std::size_t{n});
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<uint32_t>(clip.sample_rate()));
  put_u32(out, static_cast<uint32_t>(clip.sample_rate()) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);
  for (float s : clip.samples()) {
    const double clipped = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const auto q = static_cast<int16_t>(
        std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L));
    put_u16(out, static_cast<uint16_t>(q));
  }
  return out;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<float> sinc_interpolate(std::span<const float> in, double step,
                                    std::size_t out_len) {
  constexpr int kHalf = 16;  // 32 taps
  const double cutoff = std::min(1.0, 1.0 / step);
  std::vector<float> out(out_len, 0.0f);
  const auto n_in = static_cast<int64_t>(in.size());
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) * step;
    const auto base = static_cast<int64_t>(std::floor(t));
    double acc = 0.0, wsum = 0.0;
    for (int64_t k = base - kHalf + 1; k <= base + kHalf; ++k) {
      const double d = t - static_cast<double>(k);
      if (std::abs(d) >= kHalf) continue;
      const double x = cutoff * d;
      const double sinc =
          x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * d / kHalf));
      const double w = cutoff * sinc * window;
      wsum += w;
      if (k >= 0 && k < n_in) acc += w * in[static_cast<std::size_t>(k)];
    }
    out[n] = static_cast<float>(wsum != 0.0 ? acc / wsum : 0.0);
  }
  return out;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) {
    throw ConfigError("target rate must be positive, got " +
                      std::to_string(target_rate));
  }
  if (target_rate == clip.sample_rate()) return clip;
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate();
  const auto out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(clip.size()) * ratio));
  return AudioClip(sinc_interpolate(clip.view(), 1.0 / ratio, out_len), target_rate);
}

double rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace ww::audio
