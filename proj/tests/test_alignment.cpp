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

#include "test_util.hpp"
#include "ww/alignment.hpp"
#include "ww/error.hpp"
#include "ww/random.hpp"

namespace align = ww::align;
using ww::WordSpan;
using ww::audio::AudioClip;

namespace {

const std::filesystem::path kFixtures = WW_FIXTURES;

std::string tier(const std::vector<std::tuple<double, double, std::string>>& intervals,
                 const std::string& name = "words") {
  std::string s =
      "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\nxmin = 0\nxmax = 3\n"
      "tiers? <exists>\nsize = 1\nitem []:\n    item [1]:\n        class = \"IntervalTier\"\n"
      "        name = \"" + name + "\"\n        xmin = 0\n        xmax = 3\n"
      "        intervals: size = " + std::to_string(intervals.size()) + "\n";
  int i = 1;
  for (const auto& [a, b, text] : intervals) {
    s += "        intervals [" + std::to_string(i++) + "]:\n            xmin = " + std::to_string(a) +
         "\n            xmax = " + std::to_string(b) + "\n            text = \"" + text + "\"\n";
  }
  return s;
}

AudioClip ramp(std::size_t n) {
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(i + 1) / static_cast<float>(n);
  return AudioClip(x, 16000);
}

}  // namespace

TEST_CASE("empty intervals are skipped") {
  const auto spans = align::parse_textgrid_text(tier({{0, 0.5, "hey"}, {0.5, 0.9, ""}}));
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == WordSpan{"hey", 0.0, 0.5});
}

TEST_CASE("fixture TextGrid yields 3 sorted lowercase spans") {
  const auto spans = align::parse_textgrid(kFixtures / "three_words.TextGrid");
  REQUIRE(spans.size() == 3);
  CHECK(spans[0] == WordSpan{"hey", 0.25, 0.6});
  CHECK(spans[1] == WordSpan{"firefox", 0.6, 1.3});
  CHECK(spans[2] == WordSpan{"play", 1.3, 1.7});
}

TEST_CASE("TextGrid errors") {
  CHECK_THROWS_AS(align::parse_textgrid_text(tier({{0, 0.6, "a"}, {0.5, 0.9, "b"}})),
                  ww::FormatError);
  CHECK_THROWS_AS(align::parse_textgrid_text(tier({{0, 0.5, "a"}}, "phones")), ww::FormatError);
  CHECK_THROWS_AS(align::parse_textgrid_text("not a textgrid"), ww::FormatError);
  CHECK_THROWS_AS(align::validate_spans({{"a", 0.5, 0.4}}, "test"), ww::FormatError);
}

TEST_CASE("format_textgrid round-trips") {
  const std::vector<WordSpan> spans = {{"hey", 0.125, 0.5}, {"firefox", 0.75, 1.5}};
  CHECK(align::parse_textgrid_text(align::format_textgrid(spans, 2.0)) == spans);
  testutil::TempDir d;
  align::write_textgrid(spans, 2.0, d / "x.TextGrid");
  CHECK(align::parse_textgrid(d / "x.TextGrid") == spans);
}

TEST_CASE("extract_padded fills outside positions with zeros") {
  const std::vector<float> x = {1, 2, 3};
  CHECK(align::extract_padded(x, -2, 4) == std::vector<float>{0, 0, 1, 2});
  CHECK(align::extract_padded(x, 1, 4) == std::vector<float>{2, 3, 0, 0});
  CHECK(align::extract_padded(x, 5, 2) == std::vector<float>{0, 0});
}

TEST_CASE("positive window with zero jitter ends at the word") {
  const auto vocab = ww::dataset::Vocabulary::parse("hey,firefox");
  const auto clip = ramp(16000);
  const auto w = align::positive_windows(clip, {{"hey", 0.2, 0.5}}, vocab, 1.0, 0.0, 1);
  REQUIRE(w.size() == 1);
  CHECK(w[0].label == 0);
  REQUIRE(w[0].clip.size() == 16000);
  // Window covers [-0.5, 0.5]: 8000 zeros, then samples 0..7999.
  CHECK(w[0].clip.samples()[7999] == 0.0f);
  CHECK(w[0].clip.samples()[8000] == clip.samples()[0]);
  CHECK(w[0].clip.samples()[15999] == clip.samples()[7999]);
}

TEST_CASE("one positive window per vocabulary word span") {
  const auto vocab = ww::dataset::Vocabulary::parse("hey,firefox");
  const std::vector<WordSpan> spans = {{"hey", 0.2, 0.5}, {"please", 0.5, 0.7}, {"firefox", 0.8, 1.4}};
  const auto w = align::positive_windows(ramp(32000), spans, vocab, 1.0, 0.2, 3);
  REQUIRE(w.size() == 2);
  CHECK(w[0].label == 0);
  CHECK(w[1].label == 1);
}

TEST_CASE("every positive window contains its whole word span") {
  const auto vocab = ww::dataset::Vocabulary::parse("hey,firefox");
  ww::Rng rng(17);
  int windows = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(0.0, 2.0);
    const double b = a + rng.uniform(0.05, 0.9);
    const double c = b + rng.uniform(0.0, 0.3);
    const double e = c + rng.uniform(0.05, 0.9);
    const std::vector<WordSpan> spans = {{"hey", a, b}, {"firefox", c, e}};
    const auto plans = align::plan_positive_windows(spans, vocab, 16000, 1.0, 0.2,
                                                    static_cast<uint64_t>(trial));
    REQUIRE(plans.size() == 2);
    for (const auto& p : plans) {
      ++windows;
      const double start = static_cast<double>(p.start) / 16000.0;
      const double end = start + 1.0;
      CHECK(start <= p.span.start_s + 1e-9);
      CHECK(end >= p.span.end_s - 1e-9);
      CHECK(end <= p.span.end_s + 0.2 + 1.0 / 16000.0);
    }
  }
  CHECK(windows == 100);
}

TEST_CASE("negative window counts") {
  CHECK(align::negative_windows(ramp(32000), 1.0, 1.0, 2).size() == 2);
  const auto short_clip = align::negative_windows(ramp(4000), 1.0, 1.0, 2);
  REQUIRE(short_clip.size() == 1);
  CHECK(short_clip[0].clip.size() == 16000);
  CHECK(short_clip[0].clip.samples()[4000] == 0.0f);
  const auto w = align::negative_windows(ramp(56000), 1.0, 0.5, 2);
  CHECK(w.size() == 6);
  for (const auto& x : w) {
    CHECK(x.label == 2);
    CHECK(x.clip.size() == 16000);
  }
}

TEST_CASE("window_samples") {
  CHECK(align::window_samples(1.0, 16000) == 16000);
  CHECK(align::window_samples(0.03, 16000) == 480);
}
