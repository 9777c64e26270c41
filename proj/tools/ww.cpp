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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "settings.hpp"
#include "ww/alignment.hpp"
#include "ww/augment.hpp"
#include "ww/bundle.hpp"
#include "ww/dataset.hpp"
#include "ww/error.hpp"
#include "ww/eval.hpp"
#include "ww/infer.hpp"
#include "ww/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using ww::cli::SettingDef;
using ww::cli::Settings;
using ww::cli::Type;
using ww::cli::UsageError;

namespace {

constexpr const char* kDefaultKeywords = "yes,no,up,down,left,right,on,off,stop,go";

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::array<double, 3> parse_ratios(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != 3) throw UsageError("ratios: expected three comma-separated numbers, got '" + text + "'");
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = ww::cli::parse_value(parts[i], Type::kFloat, "ratios").get<double>();
  }
  return out;
}

ww::dataset::Split split_setting(const Settings& s, const std::string& key) {
  try {
    return ww::dataset::parse_split(s.str(key));
  } catch (const ww::Error& e) {
    throw UsageError(ww::cli::flag_name(key) + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ww::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw ww::IoError("write failed for " + path.string());
}

void print_json(const json& j) { std::cout << j.dump() << std::endl; }

// Settings shared by every subcommand.
std::vector<SettingDef> with_common(std::vector<SettingDef> defs) {
  defs.push_back({"log_level", Type::kString, "info", "trace, debug, info, warn, error, off"});
  return defs;
}

std::vector<SettingDef> inference_defs() {
  return {
      {"stride_s", Type::kFloat, "0.2", "seconds between posterior frames"},
      {"smoothing", Type::kInt, "4", "posterior smoothing window in frames"},
      {"tau_s", Type::kFloat, "1.5", "longest phrase span in seconds"},
      {"refractory_s", Type::kFloat, "1.0", "seconds without triggers after an event"},
      {"threshold", Type::kFloat, "0.5", "trigger threshold on smoothed posteriors"},
  };
}

// ---------------------------------------------------------------- ingest

std::vector<SettingDef> ingest_defs() {
  return with_common({
      {"format", Type::kString, std::nullopt, "mcv or speech-commands", true},
      {"tsv", Type::kString, std::nullopt, "Common Voice TSV file"},
      {"clips_dir", Type::kString, std::nullopt, "Common Voice clips directory"},
      {"split_preset", Type::kString, std::nullopt, "split for every MCV row (train, dev, test)"},
      {"root", Type::kString, std::nullopt, "Speech Commands root directory"},
      {"vocab", Type::kString, std::nullopt, "wake phrase words, e.g. hey,firefox", true},
      {"negative_fraction", Type::kFloat, "0.1", "fraction of negatives kept"},
      {"mine", Type::kString, std::nullopt, "substring fragments to count, e.g. hey,fire,fox"},
      {"seed", Type::kInt, "0", "random seed"},
      {"out", Type::kString, std::nullopt, "output manifest (JSON lines)", true},
  });
}

int run_ingest(const Settings& s) {
  const auto vocab = ww::dataset::Vocabulary::parse(s.str("vocab"));
  const std::string format = s.str("format");
  ww::dataset::IngestResult ingest;
  if (format == "mcv") {
    if (!s.has("tsv") || !s.has("clips_dir")) throw UsageError("mcv ingest needs --tsv and --clips-dir");
    std::optional<ww::dataset::Split> preset;
    if (s.has("split_preset")) preset = split_setting(s, "split_preset");
    ingest = ww::dataset::ingest_mcv(s.str("tsv"), s.str("clips_dir"), preset);
  } else if (format == "speech-commands") {
    if (!s.has("root")) throw UsageError("speech-commands ingest needs --root");
    ingest = ww::dataset::ingest_speech_commands(s.str("root"));
  } else {
    throw UsageError("--format: expected mcv or speech-commands, got '" + format + "'");
  }
  json summary{{"samples", ingest.samples.size()},
               {"skipped_missing_audio", ingest.skipped_missing_audio}};
  if (s.has("mine")) {
    summary["mined"] = ww::dataset::mine_substring(ingest.samples, split_list(s.str("mine"))).size();
  }
  auto ds = ww::dataset::filter_vocab(std::move(ingest.samples), vocab);
  ds = ww::dataset::subsample_negatives(std::move(ds), s.real("negative_fraction"),
                                        static_cast<uint64_t>(s.integer("seed")));
  ww::dataset::save_manifest(ds, s.str("out"));
  summary["positives"] = ds.positives.size();
  summary["negatives"] = ds.negatives.size();
  print_json(summary);
  return 0;
}

// ---------------------------------------------------------------- split

std::vector<SettingDef> split_defs() {
  return with_common({
      {"manifest", Type::kString, std::nullopt, "input manifest", true},
      {"out", Type::kString, std::nullopt, "output manifest", true},
      {"ratios", Type::kString, "0.8,0.1,0.1", "train,dev,test fractions"},
      {"seed", Type::kInt, "0", "split hash seed"},
  });
}

int run_split(const Settings& s) {
  auto ds = ww::dataset::load_manifest(s.str("manifest"));
  ds = ww::dataset::stratified_split(std::move(ds), parse_ratios(s.str("ratios")),
                                     static_cast<uint64_t>(s.integer("seed")));
  ww::dataset::save_manifest(ds, s.str("out"));
  const auto c = ds.counts();
  print_json({{"positives", {{"train", c.positives.train}, {"dev", c.positives.dev}, {"test", c.positives.test}}},
              {"negatives", {{"train", c.negatives.train}, {"dev", c.negatives.dev}, {"test", c.negatives.test}}}});
  return 0;
}

// ---------------------------------------------------------------- align-import

std::vector<SettingDef> align_defs() {
  return with_common({
      {"manifest", Type::kString, std::nullopt, "input manifest", true},
      {"textgrid_dir", Type::kString, std::nullopt, "directory of <audio stem>.TextGrid files", true},
      {"out", Type::kString, std::nullopt, "output manifest", true},
  });
}

int run_align_import(const Settings& s) {
  auto ds = ww::dataset::load_manifest(s.str("manifest"));
  const fs::path dir = s.str("textgrid_dir");
  std::size_t matched = 0, missing = 0;
  auto attach = [&](std::vector<ww::dataset::Sample>& samples) {
    for (auto& sample : samples) {
      const fs::path grid = dir / (sample.audio_path.stem().string() + ".TextGrid");
      if (!fs::exists(grid)) {
        ++missing;
        continue;
      }
      sample.alignments = ww::align::parse_textgrid(grid);
      ++matched;
    }
  };
  attach(ds.positives);
  attach(ds.negatives);
  ww::dataset::save_manifest(ds, s.str("out"));
  print_json({{"aligned", matched}, {"without_textgrid", missing}});
  return 0;
}

// ---------------------------------------------------------------- train

std::vector<SettingDef> train_defs() {
  auto defs = with_common({
      {"task", Type::kString, "wake", "wake or commands"},
      {"manifest", Type::kString, std::nullopt, "wake: split manifest with alignments"},
      {"vocab", Type::kString, std::nullopt, "wake: expected phrase (checked against the manifest)"},
      {"dataset_path", Type::kString, std::nullopt, "commands: Speech Commands root"},
      {"keywords", Type::kString, kDefaultKeywords, "commands: target keywords"},
      {"max_per_class", Type::kInt, "0", "commands: clips per class and split (0: all)"},
      {"silence_ratio", Type::kFloat, "1.0", "commands: silence examples per target class"},
      {"split_ratios", Type::kString, "0.8,0.1,0.1", "commands: ratios for unlisted files"},
      {"out_dir", Type::kString, std::nullopt, "checkpoint directory", true},
      {"resume", Type::kString, std::nullopt, "checkpoint bundle to continue from"},
      {"epochs", Type::kInt, "20", "training epochs"},
      {"lr", Type::kFloat, "0.001", "peak learning rate"},
      {"optimizer", Type::kString, "adam", "adam or sgd"},
      {"momentum", Type::kFloat, "0.9", "sgd momentum"},
      {"weight_decay", Type::kFloat, "0", "L2 penalty"},
      {"schedule", Type::kString, "cosine", "cosine or constant"},
      {"batch_size", Type::kInt, "64", "items per batch"},
      {"balance", Type::kString, std::nullopt, "positive:negative per batch (wake 1:3, commands none)"},
      {"augment", Type::kBool, "true", "apply the augmentation policy"},
      {"policy", Type::kString, std::nullopt, "JSON file with an augmentation policy"},
      {"noise_dir", Type::kString, std::nullopt, "recorded noise for mixing"},
      {"n_maps", Type::kInt, "45", "res8 feature maps"},
      {"per_band_stats", Type::kBool, "false", "per-band instead of global normalization"},
      {"window_s", Type::kFloat, std::nullopt, "window length (wake 2.0, commands 1.0)"},
      {"jitter_s", Type::kFloat, "0.2", "wake: positive window end jitter"},
      {"negative_stride_s", Type::kFloat, "1.0", "wake: stride of negative windows"},
      {"far_budget", Type::kFloat, "4.0", "wake: false alarms/hour for dev selection"},
      {"roc_points", Type::kInt, "100", "wake: thresholds swept on dev"},
      {"stop_train_accuracy", Type::kFloat, "0", "stop at this clean train accuracy (0: off)"},
      {"deterministic", Type::kBool, "true", "sequential, bit-reproducible execution"},
      {"seed", Type::kInt, "0", "random seed"},
  });
  for (auto& d : inference_defs()) defs.push_back(d);
  return defs;
}

ww::models::InferenceSettings inference_from(const Settings& s, double window_s) {
  ww::models::InferenceSettings inf;
  inf.window_s = window_s;
  inf.stride_s = s.real("stride_s");
  const auto k = s.integer("smoothing");
  if (k < 1) throw UsageError("--smoothing must be at least 1");
  inf.smoothing = static_cast<std::size_t>(k);
  inf.tau_s = s.real("tau_s");
  inf.refractory_s = s.real("refractory_s");
  inf.threshold = s.real("threshold");
  return inf;
}

std::size_t positive_setting(const Settings& s, const std::string& key) {
  const auto v = s.integer(key);
  if (v <= 0) throw UsageError(ww::cli::flag_name(key) + " must be positive");
  return static_cast<std::size_t>(v);
}

int run_train(Settings& s) {
  const std::string task_name = s.str("task");
  if (task_name != "wake" && task_name != "commands") {
    throw UsageError("--task: expected wake or commands, got '" + task_name + "'");
  }
  const bool wake = task_name == "wake";
  if (!s.has("window_s")) s.set("window_s", wake ? 2.0 : 1.0);
  if (!s.has("balance")) s.set("balance", wake ? "1:3" : "none");
  if (!s.flag("deterministic")) {
    spdlog::warn("only deterministic execution is implemented; running sequentially");
  }

  ww::train::TrainConfig cfg;
  cfg.optimizer = s.str("optimizer");
  cfg.lr = s.real("lr");
  cfg.momentum = s.real("momentum");
  cfg.weight_decay = s.real("weight_decay");
  cfg.batch_size = positive_setting(s, "batch_size");
  cfg.epochs = positive_setting(s, "epochs");
  cfg.schedule = s.str("schedule");
  cfg.balance = ww::train::parse_balance(s.str("balance"));
  cfg.seed = static_cast<uint64_t>(s.integer("seed"));
  cfg.augment = s.flag("augment");
  cfg.stop_train_accuracy = s.real("stop_train_accuracy");
  if (cfg.lr < 0.0) throw UsageError("--lr must not be negative");

  const double window_s = s.real("window_s");
  ww::train::TrainTask task;
  task.task = task_name;
  task.frontend.per_band_stats = s.flag("per_band_stats");
  task.policy = ww::augment::default_policy();
  if (s.has("policy")) {
    std::ifstream in(s.str("policy"));
    if (!in) throw ww::IoError("cannot open policy file " + s.str("policy"));
    task.policy = ww::augment::policy_from_json(json::parse(in));
  }
  task.inference = inference_from(s, window_s);
  task.model.n_maps = positive_setting(s, "n_maps");

  std::optional<fs::path> noise_dir;
  if (s.has("noise_dir")) noise_dir = s.str("noise_dir");

  if (wake) {
    if (!s.has("manifest")) throw UsageError("wake training needs --manifest (or WW_MANIFEST)");
    const auto ds = ww::dataset::load_manifest(s.str("manifest"));
    if (s.has("vocab") && ww::dataset::Vocabulary::parse(s.str("vocab")) != ds.vocab) {
      throw ww::ConfigError("--vocab does not match the manifest vocabulary");
    }
    const ww::train::WindowOptions wo{window_s, s.real("jitter_s"), s.real("negative_stride_s"),
                                      cfg.seed};
    task.train = ww::train::wake_examples(ds, ww::dataset::Split::kTrain, wo);
    task.negative_label = ds.vocab.negative_label();
    task.vocabulary = ds.vocab.words();
    task.labels = ds.vocab.words();
    task.labels.push_back("negative");
    auto dev_clips = ww::train::wake_clips(ds, ww::dataset::Split::kDev);
    if (!dev_clips.positives.empty() && !dev_clips.negatives.empty()) {
      task.dev = ww::train::wake_frr_metric(std::move(dev_clips), task.inference, ds.vocab.size(),
                                            s.real("far_budget"),
                                            positive_setting(s, "roc_points"));
    } else {
      auto dev = ww::train::wake_examples(ds, ww::dataset::Split::kDev, wo);
      if (!dev.empty()) task.dev = ww::train::accuracy_metric(std::move(dev));
    }
  } else {
    if (!s.has("dataset_path")) throw UsageError("commands training needs --dataset-path (or WW_DATASET_PATH)");
    ww::eval::CommandsOptions co;
    co.targets = split_list(s.str("keywords"));
    co.clip_s = window_s;
    co.max_per_class = static_cast<std::size_t>(s.integer("max_per_class"));
    co.silence_ratio = s.real("silence_ratio");
    co.split_ratios = parse_ratios(s.str("split_ratios"));
    co.seed = cfg.seed;
    auto cds = ww::eval::load_commands_dataset(s.str("dataset_path"), co);
    task.train = std::move(cds.splits[ww::dataset::Split::kTrain]);
    task.labels = cds.labels;
    task.vocabulary = co.targets;
    if (!cds.splits[ww::dataset::Split::kDev].empty()) {
      task.dev = ww::train::accuracy_metric(std::move(cds.splits[ww::dataset::Split::kDev]));
    }
    const fs::path bg = fs::path(s.str("dataset_path")) / "_background_noise_";
    if (!noise_dir && fs::is_directory(bg)) noise_dir = bg;
  }
  task.model.n_labels = task.labels.size();
  if (noise_dir) {
    task.noise = std::make_shared<const ww::augment::NoisePool>(
        ww::augment::NoisePool::from_directory(*noise_dir));
  }
  spdlog::info("{} training windows, {} labels", task.train.size(), task.labels.size());

  const fs::path out_dir = s.str("out_dir");
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved_config.json", s.echo().dump(2) + "\n");
  std::optional<fs::path> resume;
  if (s.has("resume")) resume = s.str("resume");
  const auto r = ww::train::train(task, cfg, out_dir, resume);
  print_json({{"best_epoch", r.best_epoch},
              {"best_score", r.best_score},
              {"epochs_run", r.log.size()},
              {"stopped_early", r.stopped_early},
              {"best_bundle", r.best_bundle.string()},
              {"last_checkpoint", r.last_checkpoint.string()}});
  return 0;
}

// ---------------------------------------------------------------- eval-commands

std::vector<SettingDef> eval_commands_defs() {
  return with_common({
      {"bundle", Type::kString, std::nullopt, "model bundle directory", true},
      {"dataset_path", Type::kString, std::nullopt, "Speech Commands root", true},
      {"splits", Type::kString, "dev,test", "splits to score"},
      {"max_per_class", Type::kInt, "0", "clips per class and split (0: all)"},
      {"silence_ratio", Type::kFloat, "1.0", "silence examples per target class"},
      {"split_ratios", Type::kString, "0.8,0.1,0.1", "ratios for unlisted files"},
      {"seed", Type::kInt, "0", "seed used when the dataset was built"},
      {"report_out", Type::kString, std::nullopt, "also write the JSON report here"},
  });
}

int run_eval_commands(const Settings& s) {
  const auto bundle = ww::models::import_bundle(s.str("bundle"));
  if (bundle.task != "commands") throw ww::ConfigError("bundle is not a commands model");
  const auto classifier = ww::infer::Classifier::from_bundle(bundle);
  ww::eval::CommandsOptions co;
  co.targets = bundle.vocabulary;
  co.clip_s = bundle.inference.window_s;
  co.max_per_class = static_cast<std::size_t>(s.integer("max_per_class"));
  co.silence_ratio = s.real("silence_ratio");
  co.split_ratios = parse_ratios(s.str("split_ratios"));
  co.seed = static_cast<uint64_t>(s.integer("seed"));
  auto cds = ww::eval::load_commands_dataset(s.str("dataset_path"), co);
  if (cds.labels != bundle.labels) throw ww::ConfigError("dataset labels differ from the bundle's");
  std::map<std::string, std::vector<ww::eval::Example>> splits;
  json counts = json::object();
  for (const auto& name : split_list(s.str("splits"))) {
    ww::dataset::Split split;
    try {
      split = ww::dataset::parse_split(name);
    } catch (const ww::Error& e) {
      throw UsageError(std::string("--splits: ") + e.what());
    }
    splits[name] = cds.splits[split];
    counts[name] = splits[name].size();
  }
  const json report{{"accuracy", ww::eval::commands_accuracy(classifier, splits)},
                    {"counts", counts},
                    {"labels", cds.labels}};
  if (s.has("report_out")) write_text(s.str("report_out"), report.dump(2) + "\n");
  print_json(report);
  return 0;
}

// ---------------------------------------------------------------- eval-wake

std::vector<SettingDef> eval_wake_defs() {
  return with_common({
      {"bundle", Type::kString, std::nullopt, "model bundle directory", true},
      {"manifest", Type::kString, std::nullopt, "split manifest", true},
      {"split", Type::kString, "test", "split to evaluate"},
      {"roc_points", Type::kInt, "100", "thresholds evenly spaced in [0, 1]"},
      {"far_budget", Type::kFloat, "4.0", "false alarms per hour for the operating point"},
      {"roc_out", Type::kString, std::nullopt, "CSV file for the ROC curve"},
      {"report_out", Type::kString, std::nullopt, "also write the JSON report here"},
  });
}

int run_eval_wake(const Settings& s) {
  const auto bundle = ww::models::import_bundle(s.str("bundle"));
  if (bundle.task != "wake") throw ww::ConfigError("bundle is not a wake-word model");
  const auto classifier = ww::infer::Classifier::from_bundle(bundle);
  const auto ds = ww::dataset::load_manifest(s.str("manifest"));
  const auto clips = ww::train::wake_clips(ds, split_setting(s, "split"));
  const ww::eval::WakeEvaluation ev(classifier, bundle.inference, bundle.vocabulary.size(),
                                    clips.positives, clips.negatives);
  const auto roc = ev.roc(ww::eval::threshold_grid(positive_setting(s, "roc_points")));
  const auto op = ww::eval::choose_operating_point(roc, s.real("far_budget"));
  if (s.has("roc_out")) write_text(s.str("roc_out"), ww::eval::roc_to_csv(roc));
  const json report{{"roc", roc},
                    {"chosen", op.point},
                    {"within_budget", op.within_budget},
                    {"positives", ev.positive_count()},
                    {"negative_hours", ev.negative_hours()}};
  if (s.has("report_out")) write_text(s.str("report_out"), report.dump(2) + "\n");
  print_json({{"chosen", op.point}, {"within_budget", op.within_budget}});
  return 0;
}

// ---------------------------------------------------------------- demo

std::vector<SettingDef> demo_defs() {
  return with_common({
      {"bundle", Type::kString, std::nullopt, "model bundle directory", true},
      {"wav", Type::kString, std::nullopt, "WAV file; without it raw PCM16 is read from stdin"},
      {"sample_rate", Type::kInt, "16000", "rate of raw stdin audio"},
      {"chunk", Type::kInt, "1600", "samples per read"},
      {"threshold", Type::kFloat, std::nullopt, "override the bundle's threshold"},
      {"smoothing", Type::kInt, std::nullopt, "override the bundle's smoothing window"},
  });
}

int run_demo(const Settings& s) {
  const auto bundle = ww::models::import_bundle(s.str("bundle"));
  if (bundle.task != "wake") throw ww::ConfigError("demo needs a wake-word bundle");
  auto settings = bundle.inference;
  if (s.has("threshold")) settings.threshold = s.real("threshold");
  if (s.has("smoothing")) settings.smoothing = positive_setting(s, "smoothing");
  const auto classifier = ww::infer::Classifier::from_bundle(bundle);
  const int rate = bundle.frontend.sample_rate;
  ww::infer::WakeDetector detector(classifier, settings, bundle.vocabulary.size(), rate);
  const std::size_t chunk = positive_setting(s, "chunk");
  auto emit = [](const std::vector<ww::infer::DetectionEvent>& events) {
    for (const auto& e : events) std::cout << json(e).dump() << std::endl;
  };

  if (s.has("wav") && s.str("wav") != "-") {
    const auto clip = ww::audio::resample(ww::audio::load_wav(s.str("wav")), rate);
    const auto samples = clip.view();
    for (std::size_t i = 0; i < samples.size(); i += chunk) {
      emit(detector.push(samples.subspan(i, std::min(chunk, samples.size() - i))));
    }
    return 0;
  }
  if (s.integer("sample_rate") != rate) {
    throw ww::ConfigError("stdin audio at " + std::to_string(s.integer("sample_rate")) +
                          " Hz; the model expects " + std::to_string(rate) + " Hz");
  }
  std::vector<char> bytes(chunk * 2);
  std::vector<float> samples;
  std::string carry;
  while (std::cin) {
    std::cin.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    const auto got = static_cast<std::size_t>(std::cin.gcount());
    if (got == 0) break;
    carry.append(bytes.data(), got);
    const std::size_t usable = carry.size() / 2 * 2;
    samples.clear();
    for (std::size_t i = 0; i < usable; i += 2) {
      const auto lo = static_cast<unsigned char>(carry[i]);
      const auto hi = static_cast<unsigned char>(carry[i + 1]);
      const auto v = static_cast<int16_t>(static_cast<uint16_t>(lo | (hi << 8)));
      samples.push_back(static_cast<float>(v) / 32768.0f);
    }
    carry.erase(0, usable);
    emit(detector.push(samples));
  }
  return 0;
}

// ---------------------------------------------------------------- export

std::vector<SettingDef> export_defs() {
  return with_common({
      {"bundle", Type::kString, std::nullopt, "checkpoint bundle directory", true},
      {"out", Type::kString, std::nullopt, "deployment bundle directory", true},
  });
}

int run_export(const Settings& s) {
  const auto bundle = ww::models::import_bundle(s.str("bundle"));
  ww::models::export_bundle(bundle, s.str("out"));
  const auto check = ww::models::import_bundle(s.str("out"));
  print_json({{"out", s.str("out")},
              {"arch", check.arch},
              {"parameters", check.parameter_count()},
              {"tensors", check.tensors.size()},
              {"labels", check.labels}});
  return 0;
}

struct Command {
  std::string name;
  std::string help;
  std::vector<SettingDef> defs;
  std::function<int(Settings&)> run;
};

void error_line(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("ww");
  spdlog::set_default_logger(logger);

  std::vector<Command> commands{
      {"ingest", "build a wake-word manifest from a corpus", ingest_defs(), run_ingest},
      {"split", "assign speaker-stratified splits", split_defs(), run_split},
      {"align-import", "attach TextGrid word alignments", align_defs(), run_align_import},
      {"train", "train a res8 model", train_defs(), run_train},
      {"eval-commands", "keyword accuracy per split", eval_commands_defs(), run_eval_commands},
      {"eval-wake", "wake-word ROC and operating point", eval_wake_defs(), run_eval_wake},
      {"demo", "stream audio and print detections as JSON lines", demo_defs(), run_demo},
      {"export", "verify and write a deployment bundle", export_defs(), run_export},
  };

  CLI::App app{"Wake-word toolkit"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;
  std::map<std::string, std::string> config_flag;
  std::map<std::string, CLI::App*> subs;
  for (auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    subs[c.name] = sub;
    sub->add_option("--config", config_flag[c.name],
                    "JSON settings file or a resolved-config echo (env WW_CONFIG)");
    for (const auto& d : c.defs) {
      std::string help = d.help + " [" + ww::cli::env_name(d.key) + "]";
      if (d.default_value) help += " (default " + *d.default_value + ")";
      options[c.name][d.key] = sub->add_option(ww::cli::flag_name(d.key), raw[c.name][d.key], help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("usage", e.what());
    return 2;
  }

  for (auto& c : commands) {
    if (!subs[c.name]->parsed()) continue;
    try {
      std::map<std::string, std::string> flags;
      for (const auto& [key, opt] : options[c.name]) {
        if (opt->count() > 0) flags[key] = raw[c.name][key];
      }
      std::optional<std::string> config_path;
      if (subs[c.name]->get_option("--config")->count() > 0) {
        config_path = config_flag[c.name];
      } else if (const char* env = std::getenv("WW_CONFIG"); env != nullptr) {
        config_path = env;
      }
      auto settings = ww::cli::resolve(c.name, c.defs, flags, config_path);
      spdlog::set_level(spdlog::level::from_str(settings.str("log_level")));
      std::cerr << settings.echo().dump() << std::endl;
      return c.run(settings);
    } catch (const UsageError& e) {
      error_line("usage", e.what());
      return 2;
    } catch (const ww::Error& e) {
      error_line(e.kind(), e.what());
      return 1;
    } catch (const std::exception& e) {
      error_line("runtime", e.what());
      return 1;
    }
  }
  return 0;
}
