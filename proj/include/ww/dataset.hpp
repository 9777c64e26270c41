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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ww/word_span.hpp"

namespace ww::dataset {

enum class Split { kTrain, kDev, kTest };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct Sample {
  std::filesystem::path audio_path;
  std::string transcript;
  std::string speaker_id;
  std::optional<Split> split;
  std::optional<std::vector<WordSpan>> alignments;

  bool operator==(const Sample&) const = default;
};

/// Ordered wake-phrase words. Word i has label i; the negative label is
/// size().
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  /// Parses "hey,firefox" or "hey firefox".
  static Vocabulary parse(std::string_view text);

  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  int negative_label() const { return static_cast<int>(words_.size()); }
  std::size_t num_labels() const { return words_.size() + 1; }
  std::optional<int> label_of(std::string_view word) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<std::string> words_;
};

struct SplitCounts {
  std::size_t train = 0, dev = 0, test = 0, unassigned = 0;
};

struct DatasetCounts {
  SplitCounts positives;
  SplitCounts negatives;
};

struct WakeWordDataset {
  Vocabulary vocab;
  std::vector<Sample> positives;
  std::vector<Sample> negatives;

  DatasetCounts counts() const;
  bool operator==(const WakeWordDataset&) const = default;
};

/// Lowercases, maps every character outside [a-z' ] to a space, and
/// collapses runs of whitespace.
std::string normalize_transcript(std::string_view text);

std::vector<std::string> tokenize(std::string_view normalized);

struct IngestResult {
  std::vector<Sample> samples;
  std::size_t skipped_missing_audio = 0;
};

/// Common Voice TSV: header row with at least path, sentence, client_id.
/// Rows whose audio file is missing from `clips_dir` are skipped and counted.
/// `preset` assigns a split to every row (MCV ships train/dev/test TSVs).
IngestResult ingest_mcv(const std::filesystem::path& tsv_path,
                        const std::filesystem::path& clips_dir,
                        std::optional<Split> preset = std::nullopt);

/// Speech Commands layout: one directory per keyword. Directories starting
/// with '_' (e.g. _background_noise_) are ignored. When testing_list.txt or
/// validation_list.txt exist, listed files go to test/dev and the rest to
/// train; otherwise splits stay unassigned.
IngestResult ingest_speech_commands(const std::filesystem::path& root);

/// Whole-token match of any vocabulary word.
bool contains_vocab_word(const Sample& s, const Vocabulary& vocab);

WakeWordDataset filter_vocab(std::vector<Sample> samples, const Vocabulary& vocab);

/// Corpus mining helper: samples whose transcript contains any fragment as a
/// substring ("fire" matches "firefox"). Not used for labeling.
std::vector<Sample> mine_substring(const std::vector<Sample>& samples,
                                   const std::vector<std::string>& fragments);

/// Keeps each negative with probability `fraction`, decided per sample by a
/// stable hash of (path, seed).
WakeWordDataset subsample_negatives(WakeWordDataset ds, double fraction, uint64_t seed);

/// 64-bit FNV-1a.
uint64_t fnv1a64(std::string_view bytes, uint64_t hash = 0xcbf29ce484222325ULL);

/// Split bucket for a speaker: FNV-1a over speaker_id followed by the seed's
/// 8 little-endian bytes, mapped to [0, 1) and cut at the cumulative ratios.
Split speaker_split(std::string_view speaker_id, uint64_t seed,
                    const std::array<double, 3>& ratios);

/// Assigns splits by speaker. Samples that already carry a split keep it.
WakeWordDataset stratified_split(WakeWordDataset ds,
                                 const std::array<double, 3>& ratios = {0.8, 0.1, 0.1},
                                 uint64_t seed = 0);

/// JSON-lines manifest. The first line is a header
/// {"format":"ww-manifest","version":1,"vocab":[...]}; each following line is
/// one sample with a "subset" field of "positive" or "negative".
void save_manifest(const WakeWordDataset& ds, const std::filesystem::path& path);
WakeWordDataset load_manifest(const std::filesystem::path& path);

}  // namespace ww::dataset
