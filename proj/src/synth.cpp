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

#include "ww/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>

#include "ww/error.hpp"
#include "ww/random.hpp"

namespace ww::synth {

namespace fs = std::filesystem;

namespace {

struct Signature {
  double f_start;
  double f_end;
  double harmonic;  // relative level of the 2x partial
  double duration;
};

Signature signature_of(const std::string& word) {
  const uint64_t h = mix64(dataset::fnv1a64(word));
  Signature s;
  s.f_start = 300.0 + static_cast<double>(h % 24) * 120.0;
  const double slope = static_cast<double>(static_cast<int>((h >> 8) % 7) - 3) * 0.15;
  s.f_end = s.f_start * (1.0 + slope);
  s.harmonic = 0.2 + static_cast<double>((h >> 16) % 5) * 0.15;
  s.duration = 0.25 + static_cast<double>((h >> 24) % 5) * 0.08;
  return s;
}

}  // namespace

double word_duration(const std::string& word) { return signature_of(word).duration; }

audio::AudioClip word_clip(const std::string& word, int sample_rate, uint64_t seed) {
  const Signature sig = signature_of(word);
  Rng rng(seed);
  const double pitch = rng.uniform(0.97, 1.03);
  const double level = rng.uniform(0.3, 0.6);
  const auto n = static_cast<std::size_t>(std::llround(sig.duration * sample_rate));
  std::vector<float> out(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n);
    const double f = pitch * (sig.f_start + (sig.f_end - sig.f_start) * u);
    phase += 2.0 * std::numbers::pi * f / sample_rate;
    const double env = std::sin(std::numbers::pi * u);
    const double v = std::sin(phase) + sig.harmonic * std::sin(2.0 * phase);
    out[i] = static_cast<float>(level * env * v / (1.0 + sig.harmonic));
  }
  return audio::AudioClip(std::move(out), sample_rate);
}

audio::AudioClip noise_clip(std::size_t n, int sample_rate, double level, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> out(n);
  for (auto& x : out) x = static_cast<float>(std::clamp(level * rng.normal(), -1.0, 1.0));
  return audio::AudioClip(std::move(out), sample_rate);
}

Utterance utterance(const std::vector<std::string>& words, double duration_s, int sample_rate,
                    double lead_s, double noise_level, uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  auto bg = noise_clip(n, sample_rate, noise_level, rng.next_u64());
  std::vector<float> mix = bg.samples();
  Utterance u;
  double t = lead_s + rng.uniform(0.0, 0.2);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto clip = word_clip(words[w], sample_rate, rng.next_u64());
    const auto start = static_cast<std::size_t>(std::llround(t * sample_rate));
    if (start + clip.size() > n) {
      throw ConfigError("synth: " + std::to_string(words.size()) + " words do not fit in " +
                        std::to_string(duration_s) + " s");
    }
    for (std::size_t i = 0; i < clip.size(); ++i) {
      mix[start + i] = std::clamp(mix[start + i] + clip.samples()[i], -1.0f, 1.0f);
    }
    const double start_s = static_cast<double>(start) / sample_rate;
    const double end_s = static_cast<double>(start + clip.size()) / sample_rate;
    u.spans.push_back({words[w], start_s, end_s});
    if (!u.transcript.empty()) u.transcript += ' ';
    u.transcript += words[w];
    t = end_s + rng.uniform(0.05, 0.2);
  }
  u.clip = audio::AudioClip(std::move(mix), sample_rate);
  return u;
}

dataset::WakeWordDataset write_wake_corpus(const fs::path& dir, const CorpusOptions& o) {
  fs::create_directories(dir);
  dataset::WakeWordDataset ds;
  ds.vocab = dataset::Vocabulary(o.phrase);
  Rng rng(derive_seed(o.seed, 0x5e7));
  const int sr = audio::kPipelineRate;
  for (std::size_t i = 0; i < o.positives; ++i) {
    auto u = utterance(o.phrase, o.positive_s, sr, o.positive_lead_s, o.noise_level, rng.next_u64());
    const auto path = dir / ("pos_" + std::to_string(i) + ".wav");
    audio::write_wav(u.clip, path);
    dataset::Sample s;
    s.audio_path = path;
    s.transcript = u.transcript;
    s.speaker_id = "spk" + std::to_string(i % o.speakers);
    s.alignments = u.spans;
    ds.positives.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < o.negatives; ++i) {
    std::vector<std::string> words;
    const auto count = static_cast<std::size_t>(rng.uniform_int(1, 3));
    for (std::size_t k = 0; k < count; ++k) {
      words.push_back(o.distractors[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int64_t>(o.distractors.size()) - 1))]);
    }
    auto u = utterance(words, o.negative_s, sr, 0.2, o.noise_level, rng.next_u64());
    const auto path = dir / ("neg_" + std::to_string(i) + ".wav");
    audio::write_wav(u.clip, path);
    dataset::Sample s;
    s.audio_path = path;
    s.transcript = u.transcript;
    s.speaker_id = "spk" + std::to_string((i + 3) % o.speakers);
    s.alignments = u.spans;
    ds.negatives.push_back(std::move(s));
  }
  return ds;
}

void write_speech_commands_tree(const fs::path& root, const std::vector<std::string>& keywords,
                                std::size_t clips_per_keyword, std::size_t speakers,
                                double dev_fraction, double test_fraction, uint64_t seed) {
  const int sr = audio::kPipelineRate;
  Rng rng(derive_seed(seed, 0x5c));
  std::vector<std::string> speaker_ids;
  for (std::size_t s = 0; s < speakers; ++s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08llx",
                  static_cast<unsigned long long>(rng.next_u64() & 0xffffffffULL));
    speaker_ids.emplace_back(buf);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * speakers));
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * speakers));
  fs::create_directories(root);
  std::ofstream testing(root / "testing_list.txt");
  std::ofstream validation(root / "validation_list.txt");
  if (!testing || !validation) throw IoError("cannot write split lists under " + root.string());
  for (const auto& kw : keywords) {
    fs::create_directories(root / kw);
    for (std::size_t i = 0; i < clips_per_keyword; ++i) {
      const std::size_t spk = i % speakers;
      const std::string rel = kw + "/" + speaker_ids[spk] + "_nohash_" +
                              std::to_string(i / speakers) + ".wav";
      auto clip = noise_clip(sr, sr, 0.005, rng.next_u64());
      const auto word = word_clip(kw, sr, rng.next_u64());
      std::vector<float> mix = clip.samples();
      const auto max_start = static_cast<int64_t>(sr - word.size());
      const auto start = static_cast<std::size_t>(rng.uniform_int(0, std::max<int64_t>(0, max_start)));
      for (std::size_t k = 0; k < word.size() && start + k < mix.size(); ++k) {
        mix[start + k] = std::clamp(mix[start + k] + word.samples()[k], -1.0f, 1.0f);
      }
      audio::write_wav(audio::AudioClip(std::move(mix), sr), root / rel);
      if (spk < n_test) {
        testing << rel << '\n';
      } else if (spk < n_test + n_dev) {
        validation << rel << '\n';
      }
    }
  }
  fs::create_directories(root / "_background_noise_");
  for (int k = 0; k < 2; ++k) {
    audio::write_wav(noise_clip(static_cast<std::size_t>(10 * sr), sr, 0.05 + 0.05 * k,
                                rng.next_u64()),
                     root / "_background_noise_" / ("noise_" + std::to_string(k) + ".wav"));
  }
}

}  // namespace ww::synth
