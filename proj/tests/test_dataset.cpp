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

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "test_util.hpp"
#include "ww/audio.hpp"
#include "ww/dataset.hpp"
#include "ww/error.hpp"
#include "ww/random.hpp"

namespace ds = ww::dataset;
using ds::Sample;
using ds::Split;

namespace {

const std::filesystem::path kFixtures = WW_FIXTURES;

void touch_wav(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  ww::audio::write_wav(ww::audio::AudioClip(std::vector<float>(160, 0.1f), 16000), p);
}

Sample sample(std::string transcript, std::string speaker = "s") {
  Sample s;
  s.audio_path = "x.wav";
  s.transcript = std::move(transcript);
  s.speaker_id = std::move(speaker);
  return s;
}

}  // namespace

TEST_CASE("normalize_transcript") {
  CHECK(ds::normalize_transcript("Hey, Firefox!") == "hey firefox");
  CHECK(ds::normalize_transcript("  It's   FINE\t") == "it's fine");
  CHECK(ds::normalize_transcript("hey,firefox") == "hey firefox");
  CHECK(ds::normalize_transcript("") == "");
  CHECK(ds::tokenize("hey  firefox") == std::vector<std::string>{"hey", "firefox"});
}

TEST_CASE("Vocabulary") {
  const auto v = ds::Vocabulary::parse("hey,firefox");
  CHECK(v == ds::Vocabulary::parse("hey firefox"));
  CHECK(v.size() == 2);
  CHECK(v.negative_label() == 2);
  CHECK(v.num_labels() == 3);
  CHECK(v.label_of("firefox") == 1);
  CHECK_FALSE(v.label_of("fox").has_value());
  CHECK_THROWS_AS(ds::Vocabulary(std::vector<std::string>{}), ww::ConfigError);
  CHECK_THROWS_AS(ds::Vocabulary({"hey", "hey"}), ww::ConfigError);
}

TEST_CASE("ingest_mcv reads the 3-row fixture") {
  testutil::TempDir d;
  for (int i = 1; i <= 3; ++i) touch_wav(d / ("common_voice_en_" + std::to_string(i) + ".wav"));
  const auto r = ds::ingest_mcv(kFixtures / "mcv" / "validated.tsv", d.path());
  REQUIRE(r.samples.size() == 3);
  CHECK(r.skipped_missing_audio == 0);
  CHECK(r.samples[0].transcript == "hey firefox");
  CHECK(r.samples[0].speaker_id == "c0ffee01");
  CHECK(r.samples[1].speaker_id == "badf00d2");
  CHECK(r.samples[2].speaker_id == "c0ffee01");
  CHECK(r.samples[1].transcript == "open a new tab please");
  for (const auto& s : r.samples) CHECK_FALSE(s.split.has_value());
  CHECK(r.samples[2].audio_path == d / "common_voice_en_3.wav");

  const auto preset = ds::ingest_mcv(kFixtures / "mcv" / "validated.tsv", d.path(), Split::kDev);
  for (const auto& s : preset.samples) CHECK(s.split == Split::kDev);
}

TEST_CASE("ingest_mcv skips rows with missing audio and counts them") {
  testutil::TempDir d;
  touch_wav(d / "common_voice_en_2.wav");
  const auto r = ds::ingest_mcv(kFixtures / "mcv" / "validated.tsv", d.path());
  CHECK(r.samples.size() == 1);
  CHECK(r.skipped_missing_audio == 2);
}

TEST_CASE("ingest_mcv header handling") {
  testutil::TempDir d;
  testutil::write_text(d / "empty.tsv", "client_id\tpath\tsentence\n");
  CHECK(ds::ingest_mcv(d / "empty.tsv", d.path()).samples.empty());
  testutil::write_text(d / "bad.tsv", "client_id\tsentence\nx\thello\n");
  CHECK_THROWS_AS(ds::ingest_mcv(d / "bad.tsv", d.path()), ww::FormatError);
}

TEST_CASE("ingest_speech_commands on a 3 x 4 tree") {
  testutil::TempDir d;
  for (const char* word : {"yes", "no", "up"}) {
    for (int i = 0; i < 4; ++i) {
      touch_wav(d / word / ("spk" + std::to_string(i % 2) + "a_nohash_" + std::to_string(i) + ".wav"));
    }
  }
  touch_wav(d / "_background_noise_" / "white.wav");
  SUBCASE("without lists splits stay unassigned") {
    const auto r = ds::ingest_speech_commands(d.path());
    REQUIRE(r.samples.size() == 12);
    std::map<std::string, int> per_word;
    for (const auto& s : r.samples) {
      ++per_word[s.transcript];
      CHECK_FALSE(s.split.has_value());
      CHECK((s.speaker_id == "spk0a" || s.speaker_id == "spk1a"));
    }
    CHECK(per_word == std::map<std::string, int>{{"no", 4}, {"up", 4}, {"yes", 4}});
  }
  SUBCASE("list files assign dev and test") {
    testutil::write_text(d / "testing_list.txt", "yes/spk0a_nohash_0.wav\n");
    testutil::write_text(d / "validation_list.txt", "no/spk1a_nohash_1.wav\nup/spk0a_nohash_2.wav\n");
    const auto r = ds::ingest_speech_commands(d.path());
    std::map<Split, int> counts;
    for (const auto& s : r.samples) {
      REQUIRE(s.split.has_value());
      ++counts[*s.split];
      if (s.audio_path.filename() == "spk0a_nohash_0.wav" && s.transcript == "yes") {
        CHECK(*s.split == Split::kTest);
      }
    }
    CHECK(counts[Split::kTest] == 1);
    CHECK(counts[Split::kDev] == 2);
    CHECK(counts[Split::kTrain] == 9);
  }
  CHECK_THROWS_AS(ds::ingest_speech_commands(d / "missing"), ww::IoError);
}

TEST_CASE("filter_vocab matches whole tokens only") {
  const auto vocab = ds::Vocabulary::parse("hey,firefox");
  CHECK(ds::contains_vocab_word(sample("hey there"), vocab));
  CHECK_FALSE(ds::contains_vocab_word(sample("firefly"), vocab));
  std::ifstream in(kFixtures / "transcripts.txt");
  std::vector<Sample> samples;
  for (std::string line; std::getline(in, line);) samples.push_back(sample(line));
  REQUIRE(samples.size() == 10);
  const auto set = ds::filter_vocab(samples, vocab);
  CHECK(set.positives.size() == 4);
  CHECK(set.negatives.size() == 6);
  CHECK(set.vocab == vocab);
}

TEST_CASE("filter_vocab partition is exact and exhaustive") {
  const auto vocab = ds::Vocabulary::parse("hey,firefox");
  const std::vector<std::string> words = {"hey", "firefox", "fire", "fox", "they", "open", "a"};
  ww::Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sample> samples;
    for (int i = 0; i < 20; ++i) {
      std::string t;
      for (int w = 0, n = static_cast<int>(rng.uniform_int(1, 4)); w < n; ++w) {
        t += (w ? " " : "") + words[static_cast<std::size_t>(rng.uniform_int(0, 6))];
      }
      auto s = sample(t);
      s.audio_path = "clip" + std::to_string(i) + ".wav";
      samples.push_back(s);
    }
    const auto set = ds::filter_vocab(samples, vocab);
    CHECK(set.positives.size() + set.negatives.size() == samples.size());
    for (const auto& s : set.positives) CHECK(ds::contains_vocab_word(s, vocab));
    for (const auto& s : set.negatives) CHECK_FALSE(ds::contains_vocab_word(s, vocab));
  }
}

TEST_CASE("mine_substring finds fragments inside words") {
  const std::vector<Sample> samples = {sample("firefly"), sample("open tab"), sample("the fox")};
  const auto mined = ds::mine_substring(samples, {"fire", "fox"});
  CHECK(mined.size() == 2);
}

TEST_CASE("subsample_negatives is seeded and keeps positives") {
  ds::WakeWordDataset set;
  set.vocab = ds::Vocabulary::parse("hey");
  set.positives = {sample("hey")};
  for (int i = 0; i < 400; ++i) {
    auto s = sample("no");
    s.audio_path = "n" + std::to_string(i) + ".wav";
    set.negatives.push_back(s);
  }
  const auto a = ds::subsample_negatives(set, 0.25, 1);
  CHECK(a == ds::subsample_negatives(set, 0.25, 1));
  CHECK(a.positives.size() == 1);
  CHECK(a.negatives.size() > 60);
  CHECK(a.negatives.size() < 140);
  CHECK(ds::subsample_negatives(set, 1.0, 1).negatives.size() == 400);
  CHECK(ds::subsample_negatives(set, 0.0, 1).negatives.empty());
  CHECK_THROWS_AS(ds::subsample_negatives(set, 1.5, 1), ww::ConfigError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(ds::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(ds::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(ds::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("speaker split sizes for 1000 speakers") {
  // Counts computed offline with an independent FNV-1a implementation.
  const std::map<uint64_t, std::array<int, 3>> expected = {{0, {805, 97, 98}}, {7, {784, 115, 101}}};
  for (const auto& [seed, want] : expected) {
    std::array<int, 3> got{};
    for (int i = 0; i < 1000; ++i) {
      ++got[static_cast<std::size_t>(
          ds::speaker_split("speaker" + std::to_string(i), seed, {0.8, 0.1, 0.1}))];
    }
    CHECK(got == want);
    CHECK(std::abs(got[0] - 800) <= 40);
  }
}

TEST_CASE("stratified_split keeps speakers together") {
  ww::Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    ds::WakeWordDataset set;
    set.vocab = ds::Vocabulary::parse("hey");
    for (int i = 0; i < 60; ++i) {
      auto s = sample(i % 3 ? "no" : "hey", "spk" + std::to_string(rng.uniform_int(0, 9)));
      s.audio_path = std::to_string(i) + ".wav";
      (i % 3 ? set.negatives : set.positives).push_back(s);
    }
    set.negatives[0].split = Split::kTest;
    const auto out = ds::stratified_split(set, {0.6, 0.2, 0.2}, static_cast<uint64_t>(trial));
    std::map<std::string, std::set<Split>> where;
    for (const auto* v : {&out.positives, &out.negatives}) {
      for (const auto& s : *v) {
        REQUIRE(s.split.has_value());
        if (&s != &out.negatives[0]) where[s.speaker_id].insert(*s.split);
      }
    }
    for (const auto& [spk, splits] : where) CHECK(splits.size() == 1);
    CHECK(out.negatives[0].split == Split::kTest);
    CHECK(out == ds::stratified_split(set, {0.6, 0.2, 0.2}, static_cast<uint64_t>(trial)));
  }
  ds::WakeWordDataset one;
  one.vocab = ds::Vocabulary::parse("hey");
  one.positives = {sample("hey", "solo"), sample("hey", "solo")};
  const auto s1 = ds::stratified_split(one);
  CHECK(s1.positives[0].split == s1.positives[1].split);
  CHECK_THROWS_AS(ds::stratified_split(one, {0.5, 0.2, 0.2}), ww::ConfigError);
}

TEST_CASE("manifest round trip") {
  testutil::TempDir d;
  ds::WakeWordDataset set;
  set.vocab = ds::Vocabulary::parse("hey,firefox");
  auto p = sample("hey firefox", "a");
  p.split = Split::kDev;
  p.alignments = std::vector<ww::WordSpan>{{"hey", 0.125, 0.5}, {"firefox", 0.5, 1.25}};
  set.positives = {p};
  set.negatives = {sample("good day", "b")};
  ds::save_manifest(set, d / "m.jsonl");
  CHECK(ds::load_manifest(d / "m.jsonl") == set);

  ds::WakeWordDataset empty;
  ds::save_manifest(empty, d / "e.jsonl");
  const auto text = testutil::read_text(d / "e.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(ds::load_manifest(d / "e.jsonl") == empty);
}

TEST_CASE("hand-written 2-sample manifest") {
  const auto set = ds::load_manifest(kFixtures / "manifest_two.jsonl");
  CHECK(set.vocab.words() == std::vector<std::string>{"hey", "firefox"});
  REQUIRE(set.positives.size() == 1);
  REQUIRE(set.negatives.size() == 1);
  CHECK(set.positives[0].split == Split::kTrain);
  REQUIRE(set.positives[0].alignments.has_value());
  CHECK(set.positives[0].alignments->at(1).word == "firefox");
  CHECK_FALSE(set.negatives[0].split.has_value());
  const auto counts = set.counts();
  CHECK(counts.positives.train == 1);
  CHECK(counts.negatives.unassigned == 1);
}

TEST_CASE("malformed manifests report the line") {
  testutil::TempDir d;
  const std::string header = R"({"format":"ww-manifest","version":1,"vocab":["hey"]})";
  testutil::write_text(d / "a.jsonl", header + "\n{not json\n");
  try {
    ds::load_manifest(d / "a.jsonl");
    FAIL("expected a format error");
  } catch (const ww::FormatError& e) {
    CHECK(std::string(e.what()).find("a.jsonl:2") != std::string::npos);
  }
  testutil::write_text(d / "b.jsonl", R"({"format":"ww-manifest","version":9,"vocab":[]})" "\n");
  CHECK_THROWS_AS(ds::load_manifest(d / "b.jsonl"), ww::VersionError);
  testutil::write_text(d / "c.jsonl", "");
  CHECK_THROWS_AS(ds::load_manifest(d / "c.jsonl"), ww::FormatError);
  testutil::write_text(d / "d.jsonl",
                       header + "\n" +
                           R"({"path":"a","transcript":"x","speaker_id":"s","split":null,"subset":"maybe"})" +
                           "\n");
  CHECK_THROWS_AS(ds::load_manifest(d / "d.jsonl"), ww::FormatError);
}
