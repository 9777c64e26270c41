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

namespace ww::align {

/// Reads the interval tier named "words" from a Praat TextGrid (long text
/// format). Empty intervals are dropped, words are lowercased. Intervals must
/// be sorted and non-overlapping.
std::vector<WordSpan> parse_textgrid(const std::filesystem::path& path);
std::vector<WordSpan> parse_textgrid_text(const std::string& text,
                                          const std::string& origin = "<memory>");

/// Writes a long-format TextGrid with a single "words" tier. Gaps between
/// spans become empty intervals.
void write_textgrid(const std::vector<WordSpan>& spans, double duration_s,
                    const std::filesystem::path& path);
std::string format_textgrid(const std::vector<WordSpan>& spans, double duration_s);

/// Checks sortedness, positivity and non-overlap.
void validate_spans(const std::vector<WordSpan>& spans, const std::string& origin);

/// Fixed-length training window and its class label. The negative class is
/// vocab.negative_label().
struct LabeledWindow {
  audio::AudioClip clip;
  int label = 0;
};

/// Copies `n` samples starting at `start` (which may be negative or run past
/// the end); out-of-range positions are zero.
std::vector<float> extract_padded(std::span<const float> samples, int64_t start,
                                  std::size_t n);

struct PositiveWindowPlan {
  int64_t start = 0;  // first sample index (may be negative)
  int label = 0;
  WordSpan span;
};

/// Positions of the windows positive_windows() cuts: one per vocabulary
/// word span, ending at end_s + delta with delta ~ U[0, jitter] capped so the
/// window still holds the whole span.
std::vector<PositiveWindowPlan> plan_positive_windows(
    const std::vector<WordSpan>& spans, const dataset::Vocabulary& vocab,
    int sample_rate, double window_s, double jitter_s, uint64_t seed);

std::vector<LabeledWindow> positive_windows(const audio::AudioClip& clip,
                                            const std::vector<WordSpan>& spans,
                                            const dataset::Vocabulary& vocab,
                                            double window_s, double jitter_s,
                                            uint64_t seed);

/// Tiles the clip with windows every stride_s, labeled `negative_label`. A
/// clip shorter than the window yields one zero-padded window; an uncovered
/// tail yields a final zero-padded window.
std::vector<LabeledWindow> negative_windows(const audio::AudioClip& clip, double window_s,
                                            double stride_s, int negative_label);

std::size_t window_samples(double window_s, int sample_rate);

}  // namespace ww::align
