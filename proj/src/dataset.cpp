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

#include "ww/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ww/error.hpp"

namespace ww::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.empty()) throw ConfigError("vocabulary must not be empty");
  std::set<std::string> seen;
  for (auto& w : words_) {
    w = normalize_transcript(w);
    if (w.empty() || w.find(' ') != std::string::npos) {
      throw ConfigError("vocabulary entries must be single words");
    }
    if (!seen.insert(w).second) throw ConfigError("duplicate vocabulary word '" + w + "'");
  }
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::string cleaned(text);
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  return Vocabulary(tokenize(normalize_transcript(cleaned)));
}

std::optional<int> Vocabulary::label_of(std::string_view word) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] == word) return static_cast<int>(i);
  }
  return std::nullopt;
}

namespace {

void bump(SplitCounts& c, const std::optional<Split>& s) {
  if (!s) {
    ++c.unassigned;
    return;
  }
  switch (*s) {
    case Split::kTrain:
      ++c.train;
      break;
    case Split::kDev:
      ++c.dev;
      break;
    case Split::kTest:
      ++c.test;
      break;
  }
}

}  // namespace

DatasetCounts WakeWordDataset::counts() const {
  DatasetCounts c;
  for (const auto& s : positives) bump(c.positives, s.split);
  for (const auto& s : negatives) bump(c.negatives, s.split);
  return c;
}

std::string normalize_transcript(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    const bool keep = (c >= 'a' && c <= 'z') || c == '\'';
    if (!keep) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view normalized) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(normalized)};
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

IngestResult ingest_mcv(const fs::path& tsv_path, const fs::path& clips_dir,
                        std::optional<Split> preset) {
  std::ifstream in(tsv_path);
  if (!in) throw IoError("cannot open " + tsv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(tsv_path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw FormatError(tsv_path.string() + ": missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t path_col = column("path");
  const std::size_t sentence_col = column("sentence");
  const std::size_t client_col = column("client_id");
  const std::size_t needed = std::max({path_col, sentence_col, client_col}) + 1;

  IngestResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_tabs(line);
    if (cells.size() < needed) {
      throw FormatError(tsv_path.string() + ":" + std::to_string(line_no) +
                        ": expected at least " + std::to_string(needed) + " columns");
    }
    const fs::path audio = clips_dir / cells[path_col];
    if (!fs::exists(audio)) {
      spdlog::warn("{}:{}: audio file {} not found, skipping", tsv_path.string(),
                   line_no, audio.string());
      ++result.skipped_missing_audio;
      continue;
    }
    Sample s;
    s.audio_path = audio;
    s.transcript = normalize_transcript(cells[sentence_col]);
    s.speaker_id = cells[client_col];
    s.split = preset;
    result.samples.push_back(std::move(s));
  }
  return result;
}

namespace {

std::set<std::string> read_list(const fs::path& p) {
  std::set<std::string> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

}  // namespace

IngestResult ingest_speech_commands(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw IoError("cannot read Speech Commands root " + root.string());
  }
  const fs::path testing = root / "testing_list.txt";
  const fs::path validation = root / "validation_list.txt";
  const bool have_lists = fs::exists(testing) || fs::exists(validation);
  const auto test_set = read_list(testing);
  const auto dev_set = read_list(validation);

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (entry.is_directory() && entry.path().filename().string().rfind('_', 0) != 0) {
      dirs.push_back(entry.path());
    }
  }
  if (ec) throw IoError("cannot list " + root.string() + ": " + ec.message());
  std::sort(dirs.begin(), dirs.end());

  IngestResult result;
  for (const auto& dir : dirs) {
    const std::string keyword = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string name = f.filename().string();
      const std::string rel = keyword + "/" + name;
      Sample s;
      s.audio_path = f;
      s.transcript = normalize_transcript(keyword);
      const auto cut = name.find("_nohash_");
      s.speaker_id = cut == std::string::npos ? f.stem().string() : name.substr(0, cut);
      if (have_lists) {
        if (test_set.count(rel)) {
          s.split = Split::kTest;
        } else if (dev_set.count(rel)) {
          s.split = Split::kDev;
        } else {
          s.split = Split::kTrain;
        }
      }
      result.samples.push_back(std::move(s));
    }
  }
  return result;
}

bool contains_vocab_word(const Sample& s, const Vocabulary& vocab) {
  for (const auto& tok : tokenize(s.transcript)) {
    if (vocab.label_of(tok)) return true;
  }
  return false;
}

WakeWordDataset filter_vocab(std::vector<Sample> samples, const Vocabulary& vocab) {
  WakeWordDataset ds;
  ds.vocab = vocab;
  for (auto& s : samples) {
    (contains_vocab_word(s, vocab) ? ds.positives : ds.negatives).push_back(std::move(s));
  }
  spdlog::info("vocabulary filter: {} positives, {} negatives", ds.positives.size(),
               ds.negatives.size());
  return ds;
}

std::vector<Sample> mine_substring(const std::vector<Sample>& samples,
                                   const std::vector<std::string>& fragments) {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    const bool hit = std::any_of(fragments.begin(), fragments.end(), [&](const auto& f) {
      return s.transcript.find(f) != std::string::npos;
    });
    if (hit) out.push_back(s);
  }
  return out;
}

uint64_t fnv1a64(std::string_view bytes, uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

uint64_t hash_with_seed(std::string_view key, uint64_t seed) {
  char seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>((seed >> (8 * i)) & 0xFF);
  return fnv1a64(std::string_view(seed_bytes, 8), fnv1a64(key));
}

double unit_interval(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

}  // namespace

WakeWordDataset subsample_negatives(WakeWordDataset ds, double fraction, uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ConfigError("negative fraction must be in [0, 1]");
  }
  std::vector<Sample> kept;
  for (auto& s : ds.negatives) {
    if (unit_interval(hash_with_seed(s.audio_path.string(), seed)) < fraction) {
      kept.push_back(std::move(s));
    }
  }
  ds.negatives = std::move(kept);
  return ds;
}

Split speaker_split(std::string_view speaker_id, uint64_t seed,
                    const std::array<double, 3>& ratios) {
  const double u = unit_interval(hash_with_seed(speaker_id, seed));
  if (u < ratios[0]) return Split::kTrain;
  if (u < ratios[0] + ratios[1]) return Split::kDev;
  return Split::kTest;
}

WakeWordDataset stratified_split(WakeWordDataset ds, const std::array<double, 3>& ratios,
                                 uint64_t seed) {
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be nonnegative");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  auto assign = [&](std::vector<Sample>& v) {
    for (auto& s : v) {
      if (!s.split) s.split = speaker_split(s.speaker_id, seed, ratios);
    }
  };
  assign(ds.positives);
  assign(ds.negatives);
  return ds;
}

namespace {

json sample_to_json(const Sample& s, const char* subset) {
  json j{{"path", s.audio_path.string()},
         {"transcript", s.transcript},
         {"speaker_id", s.speaker_id},
         {"split", s.split ? json(std::string(to_string(*s.split))) : json(nullptr)},
         {"subset", subset}};
  if (s.alignments) {
    json spans = json::array();
    for (const auto& w : *s.alignments) {
      spans.push_back({{"word", w.word}, {"start_s", w.start_s}, {"end_s", w.end_s}});
    }
    j["alignments"] = std::move(spans);
  }
  return j;
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.audio_path = j.at("path").get<std::string>();
  s.transcript = j.at("transcript").get<std::string>();
  s.speaker_id = j.at("speaker_id").get<std::string>();
  const auto& split = j.at("split");
  if (!split.is_null()) s.split = parse_split(split.get<std::string>());
  if (j.contains("alignments") && !j.at("alignments").is_null()) {
    std::vector<WordSpan> spans;
    for (const auto& a : j.at("alignments")) {
      spans.push_back({a.at("word").get<std::string>(), a.at("start_s").get<double>(),
                       a.at("end_s").get<double>()});
    }
    s.alignments = std::move(spans);
  }
  return s;
}

}  // namespace

void save_manifest(const WakeWordDataset& ds, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << json{{"format", "ww-manifest"}, {"version", 1}, {"vocab", ds.vocab.words()}}.dump()
      << '\n';
  for (const auto& s : ds.positives) out << sample_to_json(s, "positive").dump() << '\n';
  for (const auto& s : ds.negatives) out << sample_to_json(s, "negative").dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

WakeWordDataset load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  auto where = [&](std::size_t n) { return path.string() + ":" + std::to_string(n); };
  std::string line;
  std::size_t line_no = 0;
  WakeWordDataset ds;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != "ww-manifest") {
          throw FormatError("missing manifest header");
        }
        if (j.at("version").get<int>() != 1) {
          throw VersionError(where(line_no) + ": unsupported manifest version " +
                             j.at("version").dump());
        }
        const auto words = j.at("vocab").get<std::vector<std::string>>();
        if (!words.empty()) ds.vocab = Vocabulary(words);
        have_header = true;
        continue;
      }
      const std::string subset = j.at("subset").get<std::string>();
      Sample s = sample_from_json(j);
      if (subset == "positive") {
        ds.positives.push_back(std::move(s));
      } else if (subset == "negative") {
        ds.negatives.push_back(std::move(s));
      } else {
        throw FormatError("unknown subset '" + subset + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError(where(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where(line_no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw FormatError(where(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError(path.string() + ": empty manifest (no header line)");
  return ds;
}

}  // namespace ww::dataset
