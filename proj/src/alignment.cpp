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

#include "ww/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "ww/error.hpp"
#include "ww/random.hpp"

namespace ww::align {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Praat escapes a quote inside a string as "".
std::string unquote(const std::string& v, const std::string& origin) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    throw FormatError(origin + ": expected quoted string, got " + v);
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    out.push_back(v[i]);
    if (v[i] == '"' && i + 2 < v.size() && v[i + 1] == '"') ++i;
  }
  return out;
}

double to_number(const std::string& v, const std::string& origin) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw FormatError(origin + ": expected a number, got '" + v + "'");
  }
}

struct Interval {
  double xmin = 0.0, xmax = 0.0;
  std::string text;
};

struct Tier {
  std::string cls, name;
  std::vector<Interval> intervals;
};

}  // namespace

void validate_spans(const std::vector<WordSpan>& spans, const std::string& origin) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (!(s.start_s >= 0.0 && s.start_s < s.end_s)) {
      throw FormatError(fmt::format("{}: span {} '{}' has invalid bounds [{}, {}]", origin, i,
                                    s.word, s.start_s, s.end_s));
    }
    if (i > 0 && s.start_s < spans[i - 1].end_s - 1e-9) {
      throw FormatError(fmt::format("{}: span {} '{}' overlaps or precedes span {}", origin,
                                    i, s.word, i - 1));
    }
  }
}

std::vector<WordSpan> parse_textgrid_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string raw;
  std::vector<Tier> tiers;
  Tier* tier = nullptr;
  Interval* interval = nullptr;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.rfind("item [", 0) == 0 && line.find("]:") != std::string::npos &&
        line != "item []:") {
      tiers.emplace_back();
      tier = &tiers.back();
      interval = nullptr;
      continue;
    }
    if (tier && line.rfind("intervals [", 0) == 0) {
      tier->intervals.emplace_back();
      interval = &tier->intervals.back();
      continue;
    }
    if (tier && line.rfind("points [", 0) == 0) {
      interval = nullptr;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || tier == nullptr) continue;
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (interval) {
      if (key == "xmin") {
        interval->xmin = to_number(value, where);
      } else if (key == "xmax") {
        interval->xmax = to_number(value, where);
      } else if (key == "text") {
        interval->text = unquote(value, where);
      }
    } else if (key == "class") {
      tier->cls = unquote(value, where);
    } else if (key == "name") {
      tier->name = unquote(value, where);
    }
  }

  const auto it = std::find_if(tiers.begin(), tiers.end(), [](const Tier& t) {
    return t.cls == "IntervalTier" && t.name == "words";
  });
  if (it == tiers.end()) throw FormatError(origin + ": no interval tier named \"words\"");

  std::vector<WordSpan> all;
  for (const auto& iv : it->intervals) all.push_back({iv.text, iv.xmin, iv.xmax});
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].start_s < all[i - 1].end_s - 1e-9) {
      throw FormatError(fmt::format("{}: interval {} [{}, {}] overlaps interval {} [{}, {}]",
                                    origin, i + 1, all[i].start_s, all[i].end_s, i,
                                    all[i - 1].start_s, all[i - 1].end_s));
    }
  }

  std::vector<WordSpan> spans;
  for (auto& s : all) {
    const std::string word = dataset::normalize_transcript(s.word);
    if (word.empty()) continue;
    spans.push_back({word, s.start_s, s.end_s});
  }
  validate_spans(spans, origin);
  return spans;
}

std::vector<WordSpan> parse_textgrid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_textgrid_text(buf.str(), path.string());
}

std::string format_textgrid(const std::vector<WordSpan>& spans, double duration_s) {
  validate_spans(spans, "<textgrid writer>");
  std::vector<std::pair<WordSpan, bool>> intervals;
  double cursor = 0.0;
  for (const auto& s : spans) {
    if (s.start_s > cursor) intervals.push_back({{"", cursor, s.start_s}, false});
    intervals.push_back({s, true});
    cursor = s.end_s;
  }
  const double xmax = std::max(duration_s, cursor);
  if (xmax > cursor) intervals.push_back({{"", cursor, xmax}, false});

  std::string out;
  out += "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n";
  out += fmt::format("xmin = 0\nxmax = {:.17g}\ntiers? <exists>\nsize = 1\nitem []:\n", xmax);
  out += "    item [1]:\n        class = \"IntervalTier\"\n        name = \"words\"\n";
  out += fmt::format("        xmin = 0\n        xmax = {:.17g}\n", xmax);
  out += fmt::format("        intervals: size = {}\n", intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& s = intervals[i].first;
    std::string quoted;
    for (char c : s.word) {
      quoted.push_back(c);
      if (c == '"') quoted.push_back('"');
    }
    out += fmt::format(
        "        intervals [{}]:\n            xmin = {:.17g}\n            xmax = {:.17g}\n"
        "            text = \"{}\"\n",
        i + 1, s.start_s, s.end_s, quoted);
  }
  return out;
}

void write_textgrid(const std::vector<WordSpan>& spans, double duration_s,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_textgrid(spans, duration_s);
  if (!out) throw IoError("write failed for " + path.string());
}

std::size_t window_samples(double window_s, int sample_rate) {
  if (!(window_s > 0.0)) throw ConfigError("window length must be positive");
  return static_cast<std::size_t>(std::llround(window_s * sample_rate));
}

std::vector<float> extract_padded(std::span<const float> samples, int64_t start,
                                  std::size_t n) {
  std::vector<float> out(n, 0.0f);
  const auto len = static_cast<int64_t>(samples.size());
  const int64_t lo = std::max<int64_t>(start, 0);
  const int64_t hi = std::min<int64_t>(start + static_cast<int64_t>(n), len);
  for (int64_t i = lo; i < hi; ++i) {
    out[static_cast<std::size_t>(i - start)] = samples[static_cast<std::size_t>(i)];
  }
  return out;
}

std::vector<PositiveWindowPlan> plan_positive_windows(const std::vector<WordSpan>& spans,
                                                      const dataset::Vocabulary& vocab,
                                                      int sample_rate, double window_s,
                                                      double jitter_s, uint64_t seed) {
  if (jitter_s < 0.0) throw ConfigError("jitter must be nonnegative");
  const std::size_t n = window_samples(window_s, sample_rate);
  const double sr = sample_rate;
  std::vector<PositiveWindowPlan> plans;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& span = spans[i];
    const auto label = vocab.label_of(span.word);
    if (!label) continue;
    if (span.length() > window_s) {
      spdlog::warn("word '{}' spans {:.3f} s, longer than the {:.3f} s window; skipped",
                   span.word, span.length(), window_s);
      continue;
    }
    const double slack = window_s - span.length() - 1.0 / sr;
    const double max_delta = std::max(0.0, std::min(jitter_s, slack));
    Rng rng(derive_seed(seed, i));
    const double delta = max_delta > 0.0 ? rng.uniform(0.0, max_delta) : 0.0;
    const double end = span.end_s + delta;
    const auto end_idx = static_cast<int64_t>(std::ceil(end * sr - 1e-9));
    plans.push_back({end_idx - static_cast<int64_t>(n), *label, span});
  }
  return plans;
}

std::vector<LabeledWindow> positive_windows(const audio::AudioClip& clip,
                                            const std::vector<WordSpan>& spans,
                                            const dataset::Vocabulary& vocab,
                                            double window_s, double jitter_s,
                                            uint64_t seed) {
  const std::size_t n = window_samples(window_s, clip.sample_rate());
  std::vector<LabeledWindow> out;
  for (const auto& plan :
       plan_positive_windows(spans, vocab, clip.sample_rate(), window_s, jitter_s, seed)) {
    out.push_back({audio::AudioClip(extract_padded(clip.view(), plan.start, n),
                                    clip.sample_rate()),
                   plan.label});
  }
  return out;
}

std::vector<LabeledWindow> negative_windows(const audio::AudioClip& clip, double window_s,
                                            double stride_s, int negative_label) {
  const std::size_t n = window_samples(window_s, clip.sample_rate());
  const std::size_t stride = window_samples(stride_s, clip.sample_rate());
  if (stride == 0) throw ConfigError("window stride must be at least one sample");
  std::size_t count = 1;
  if (clip.size() > n) count = 1 + (clip.size() - n + stride - 1) / stride;
  std::vector<LabeledWindow> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({audio::AudioClip(extract_padded(clip.view(),
                                                   static_cast<int64_t>(i * stride), n),
                                    clip.sample_rate()),
                   negative_label});
  }
  return out;
}

}  // namespace ww::align
