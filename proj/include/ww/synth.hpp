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
#include <string>
#include <vector>

#include "ww/audio.hpp"
#include "ww/dataset.hpp"
#include "ww/word_span.hpp"

namespace ww::synth {

/// A tonal burst standing in for a spoken word. Each word gets a fixed
/// signature (start and end frequency of a chirp plus a harmonic, and a
/// duration) derived from its spelling; `seed` adds small pitch and level
/// variation between utterances.
audio::AudioClip word_clip(const std::string& word, int sample_rate, uint64_t seed);
double word_duration(const std::string& word);

/// Low-level white noise, the synthetic background.
audio::AudioClip noise_clip(std::size_t n, int sample_rate, double level, uint64_t seed);

struct Utterance {
  audio::AudioClip clip;
  std::vector<WordSpan> spans;  // every word placed in the clip
  std::string transcript;
};

/// Places the words in order over a noise background, separated by random
/// gaps, starting at `lead_s` (jittered).
Utterance utterance(const std::vector<std::string>& words, double duration_s, int sample_rate,
                    double lead_s, double noise_level, uint64_t seed);

struct CorpusOptions {
  std::vector<std::string> phrase = {"hey", "firefox"};
  std::vector<std::string> distractors = {"hello", "fox", "fire", "there", "open", "music"};
  std::size_t positives = 24;
  std::size_t negatives = 24;
  std::size_t speakers = 8;
  double positive_s = 4.0;
  /// Background before the phrase starts (plus up to 0.2 s of jitter).
  double positive_lead_s = 2.0;
  double negative_s = 4.0;
  double noise_level = 0.01;
  uint64_t seed = 0;
};

/// Writes WAV files under `dir` and returns the dataset (with alignments for
/// the phrase clips, splits unassigned). Negatives hold distractor words.
dataset::WakeWordDataset write_wake_corpus(const std::filesystem::path& dir,
                                           const CorpusOptions& options);

/// Writes a Speech Commands shaped tree: one directory per keyword with
/// `<speaker>_nohash_<i>.wav` clips of 1 s, a `_background_noise_` directory
/// and validation/testing lists covering the given fractions of speakers.
void write_speech_commands_tree(const std::filesystem::path& root,
                                const std::vector<std::string>& keywords,
                                std::size_t clips_per_keyword, std::size_t speakers,
                                double dev_fraction, double test_fraction, uint64_t seed);

}  // namespace ww::synth
