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

#include "ww/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ww/alignment.hpp"
#include "ww/error.hpp"
#include "ww/optim.hpp"
#include "ww/random.hpp"

namespace ww::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

audio::AudioClip load_pipeline_clip(const fs::path& path) {
  return audio::resample(audio::load_wav(path), audio::kPipelineRate);
}

bool in_split(const dataset::Sample& s, dataset::Split split) {
  return s.split && *s.split == split;
}

}  // namespace

std::vector<Example> wake_examples(const dataset::WakeWordDataset& ds, dataset::Split split,
                                   const WindowOptions& o) {
  std::vector<Example> out;
  std::size_t unaligned = 0;
  for (std::size_t i = 0; i < ds.positives.size(); ++i) {
    const auto& s = ds.positives[i];
    if (!in_split(s, split)) continue;
    if (!s.alignments) {
      ++unaligned;
      continue;
    }
    const auto clip = load_pipeline_clip(s.audio_path);
    for (auto& w : align::positive_windows(clip, *s.alignments, ds.vocab, o.window_s, o.jitter_s,
                                           derive_seed(o.seed, i))) {
      out.push_back({std::move(w.clip), w.label});
    }
  }
  if (unaligned > 0) {
    spdlog::warn("{} positive samples in split {} have no alignments and were skipped", unaligned,
                 dataset::to_string(split));
  }
  for (const auto& s : ds.negatives) {
    if (!in_split(s, split)) continue;
    const auto clip = load_pipeline_clip(s.audio_path);
    // Lead-in windows that start before the clip, zero-padded like the
    // positives near a clip start.
    const auto n = static_cast<int64_t>(align::window_samples(o.window_s, clip.sample_rate()));
    const int64_t step = std::max<int64_t>(1, n / 8);
    for (int64_t start = step - n; start < 0; start += step) {
      out.push_back({audio::AudioClip(align::extract_padded(clip.view(), start,
                                                            static_cast<std::size_t>(n)),
                                      clip.sample_rate()),
                     ds.vocab.negative_label()});
    }
    for (auto& w : align::negative_windows(clip, o.window_s, o.negative_stride_s,
                                           ds.vocab.negative_label())) {
      out.push_back({std::move(w.clip), w.label});
    }
  }
  return out;
}

WakeClips wake_clips(const dataset::WakeWordDataset& ds, dataset::Split split) {
  WakeClips out;
  for (const auto& s : ds.positives) {
    if (in_split(s, split)) out.positives.push_back(load_pipeline_clip(s.audio_path));
  }
  for (const auto& s : ds.negatives) {
    if (in_split(s, split)) out.negatives.push_back(load_pipeline_clip(s.audio_path));
  }
  return out;
}

Balance parse_balance(const std::string& text) {
  if (text == "none" || text == "0" || text.empty()) return {0, 0};
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const int p = std::stoi(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(text);
    const std::string rest = text.substr(colon + 1);
    const int n = std::stoi(rest, &used);
    if (used != rest.size() || p < 0 || n < 0) throw std::invalid_argument(text);
    return {p, n};
  } catch (const std::logic_error&) {
    throw ConfigError("balance must look like '1:3' or 'none', got '" + text + "'");
  }
}

BatchMaker::BatchMaker(const std::vector<Example>& examples, int negative_label,
                       const features::Frontend& frontend, const augment::Augmenter* augmenter,
                       std::size_t batch_size, Balance balance, uint64_t seed)
    : examples_(&examples),
      frontend_(&frontend),
      augmenter_(augmenter),
      batch_size_(batch_size),
      balance_(negative_label < 0 ? Balance{0, 0} : balance),
      seed_(seed) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (examples.empty()) throw ConfigError("no training examples");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (examples[i].label == negative_label ? negatives_ : positives_).push_back(i);
  }
  if (balance_.enabled()) {
    if (positives_.empty() || negatives_.empty()) {
      throw ConfigError("balanced batches need both positive and negative examples (have " +
                        std::to_string(positives_.size()) + " and " +
                        std::to_string(negatives_.size()) + ")");
    }
    if (batch_size < 2) throw ConfigError("balanced batches need a batch size of at least 2");
    const double share = static_cast<double>(balance_.positive) /
                         static_cast<double>(balance_.positive + balance_.negative);
    pos_per_batch_ = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(share * static_cast<double>(batch_size))), 1,
        batch_size - 1);
  }
}

std::vector<std::vector<std::size_t>> BatchMaker::epoch_plan(std::size_t epoch) const {
  Rng rng(derive_seed(seed_, 0xba7c, epoch));
  std::vector<std::vector<std::size_t>> plan;
  if (!balance_.enabled()) {
    std::vector<std::size_t> order(examples_->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    for (std::size_t first = 0; first < order.size(); first += batch_size_) {
      plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(first),
                        order.begin() + static_cast<std::ptrdiff_t>(
                                            std::min(order.size(), first + batch_size_)));
    }
    return plan;
  }
  const std::size_t neg_per_batch = batch_size_ - pos_per_batch_;
  const std::size_t batches =
      std::max((negatives_.size() + neg_per_batch - 1) / neg_per_batch,
               (positives_.size() + pos_per_batch_ - 1) / pos_per_batch_);
  // Endless reshuffled cycles over each subset.
  auto cycle = [&rng](const std::vector<std::size_t>& pool, std::size_t count) {
    std::vector<std::size_t> out;
    std::vector<std::size_t> order = pool;
    while (out.size() < count) {
      rng.shuffle(order.begin(), order.end());
      out.insert(out.end(), order.begin(),
                 order.begin() + static_cast<std::ptrdiff_t>(
                                     std::min(order.size(), count - out.size())));
    }
    return out;
  };
  const auto pos = cycle(positives_, batches * pos_per_batch_);
  const auto neg = cycle(negatives_, batches * neg_per_batch);
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<std::size_t> items(pos.begin() + static_cast<std::ptrdiff_t>(b * pos_per_batch_),
                                   pos.begin() + static_cast<std::ptrdiff_t>((b + 1) * pos_per_batch_));
    items.insert(items.end(), neg.begin() + static_cast<std::ptrdiff_t>(b * neg_per_batch),
                 neg.begin() + static_cast<std::ptrdiff_t>((b + 1) * neg_per_batch));
    plan.push_back(std::move(items));
  }
  return plan;
}

Batch BatchMaker::stack(std::vector<features::MelFrameMatrix> feats,
                        const std::vector<std::size_t>& items) const {
  const std::size_t t = feats.front().num_frames();
  const std::size_t m = feats.front().mel_bands();
  std::vector<float> data;
  data.reserve(items.size() * t * m);
  Batch batch;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (feats[i].num_frames() != t || feats[i].mel_bands() != m) {
      throw DimensionError("batch items have different feature shapes");
    }
    data.insert(data.end(), feats[i].frames.data.begin(), feats[i].frames.data.end());
    batch.labels.push_back((*examples_)[items[i]].label);
  }
  batch.inputs = nn::Tensor<float>({items.size(), 1, t, m}, std::move(data));
  batch.items = items;
  return batch;
}

Batch BatchMaker::make(const std::vector<std::size_t>& items, std::size_t epoch,
                       std::size_t batch_index) const {
  if (augmenter_ == nullptr) return make_clean(items);
  std::vector<features::MelFrameMatrix> feats;
  for (std::size_t slot = 0; slot < items.size(); ++slot) {
    const uint64_t index = (static_cast<uint64_t>(epoch) << 32) |
                           static_cast<uint64_t>(batch_index * batch_size_ + slot);
    feats.push_back(augmenter_->run((*examples_)[items[slot]].clip, index, *frontend_));
  }
  return stack(std::move(feats), items);
}

Batch BatchMaker::make_clean(const std::vector<std::size_t>& items) const {
  std::vector<features::MelFrameMatrix> feats;
  for (auto i : items) feats.push_back((*frontend_)((*examples_)[i].clip.view()));
  return stack(std::move(feats), items);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"optimizer", c.optimizer},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"schedule", c.schedule},
           {"balance", std::to_string(c.balance.positive) + ":" + std::to_string(c.balance.negative)},
           {"seed", c.seed},
           {"augment", c.augment},
           {"stop_train_accuracy", c.stop_train_accuracy}};
}

void from_json(const json& j, TrainConfig& c) {
  c.optimizer = j.at("optimizer").get<std::string>();
  c.lr = j.at("lr").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.schedule = j.at("schedule").get<std::string>();
  c.balance = parse_balance(j.at("balance").get<std::string>());
  c.seed = j.at("seed").get<uint64_t>();
  c.augment = j.at("augment").get<bool>();
  c.stop_train_accuracy = j.at("stop_train_accuracy").get<double>();
}

double scheduled_lr(const TrainConfig& c, std::size_t epoch) {
  if (c.schedule == "constant") return c.lr;
  if (c.schedule == "cosine") {
    const double e = static_cast<double>(epoch);
    const double total = static_cast<double>(std::max<std::size_t>(c.epochs, 1));
    return c.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * e / total));
  }
  throw ConfigError("unknown lr schedule '" + c.schedule + "' (cosine, constant)");
}

DevMetric accuracy_metric(std::vector<Example> dev) {
  auto shared = std::make_shared<const std::vector<Example>>(std::move(dev));
  return {"dev_accuracy", true, [shared](const infer::Classifier& c) {
            std::vector<int> truth;
            for (const auto& e : *shared) truth.push_back(e.label);
            return eval::accuracy(eval::predict(c, *shared), truth);
          }};
}

DevMetric wake_frr_metric(WakeClips dev, models::InferenceSettings settings, std::size_t n_words,
                          double far_budget, std::size_t thresholds) {
  auto shared = std::make_shared<const WakeClips>(std::move(dev));
  return {"dev_frr", false, [=](const infer::Classifier& c) {
            const eval::WakeEvaluation ev(c, settings, n_words, shared->positives,
                                          shared->negatives);
            return eval::choose_operating_point(ev.roc(eval::threshold_grid(thresholds)),
                                                far_budget)
                .point.frr;
          }};
}

void to_json(json& j, const EpochRecord& r) {
  j = json{{"epoch", r.epoch}, {"lr", r.lr}, {"loss", r.loss}};
  j["train_accuracy"] = r.train_accuracy ? json(*r.train_accuracy) : json(nullptr);
  j["dev_metric"] = r.dev_metric ? json(*r.dev_metric) : json(nullptr);
}

void from_json(const json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<std::size_t>();
  r.lr = j.at("lr").get<double>();
  r.loss = j.at("loss").get<double>();
  r.train_accuracy.reset();
  r.dev_metric.reset();
  if (!j.at("train_accuracy").is_null()) r.train_accuracy = j.at("train_accuracy").get<double>();
  if (!j.at("dev_metric").is_null()) r.dev_metric = j.at("dev_metric").get<double>();
}

features::DatasetStats fit_example_stats(const std::vector<Example>& examples,
                                         const features::FrontendConfig& frontend) {
  features::StatsAccumulator acc(frontend.per_band_stats ? frontend.mel_bands : 0);
  for (const auto& e : examples) acc.add(features::log_mel(e.clip, frontend));
  return acc.finish();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::unique_ptr<nn::Optimizer<float>> make_optimizer(const TrainConfig& c,
                                                     const models::Res8<float>& model) {
  if (c.lr < 0.0) throw ConfigError("learning rate must not be negative");
  // A zero learning rate trains nothing; no optimizer is built.
  if (c.lr == 0.0) return nullptr;
  if (c.optimizer == "adam") {
    return std::make_unique<nn::Adam<float>>(model.parameter_tensors(), c.lr, 0.9, 0.999, 1e-8,
                                             c.weight_decay);
  }
  if (c.optimizer == "sgd") {
    return std::make_unique<nn::Sgd<float>>(model.parameter_tensors(), c.lr, c.momentum,
                                            c.weight_decay);
  }
  throw ConfigError("unknown optimizer '" + c.optimizer + "' (adam, sgd)");
}

std::string log_lines(const std::vector<EpochRecord>& log) {
  std::string out;
  for (const auto& r : log) out += json(r).dump() + "\n";
  return out;
}

}  // namespace

TrainResult train(const TrainTask& task, const TrainConfig& config, const fs::path& out_dir,
                  const std::optional<fs::path>& resume) {
  if (task.labels.size() != task.model.n_labels) {
    throw ConfigError("train: " + std::to_string(task.labels.size()) + " label names for " +
                      std::to_string(task.model.n_labels) + " model outputs");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  TrainResult result;
  std::size_t start_epoch = 0;
  std::optional<double> best_score;
  models::Res8<float> model(task.model, derive_seed(config.seed, 0x3d));
  features::DatasetStats stats;
  std::optional<nn::OptimizerState> opt_state;

  if (resume) {
    const auto bundle = models::import_bundle(*resume);
    if (bundle.config != task.model) throw ConfigError("resume: checkpoint model config differs");
    model = models::instantiate(bundle);
    stats = bundle.stats;
    const json state = read_json(*resume / "trainer.json");
    start_epoch = state.at("epoch").get<std::size_t>() + 1;
    result.best_epoch = state.at("best_epoch").get<std::size_t>();
    best_score = state.at("best_score").get<double>();
    result.log = state.at("log").get<std::vector<EpochRecord>>();
    if (fs::exists(*resume / "optimizer.json")) opt_state = models::load_optimizer_state(*resume);
    spdlog::info("resuming from {} at epoch {}", resume->string(), start_epoch);
  } else {
    stats = fit_example_stats(task.train, task.frontend);
  }

  const features::Frontend frontend(task.frontend, stats);
  std::optional<augment::Augmenter> augmenter;
  if (config.augment && !task.policy.empty()) {
    augmenter = augment::compose(task.policy, derive_seed(config.seed, 0xa06), task.noise);
  }
  const BatchMaker maker(task.train, task.negative_label, frontend,
                         augmenter ? &*augmenter : nullptr, config.batch_size, config.balance,
                         config.seed);
  auto optimizer = make_optimizer(config, model);
  if (optimizer && opt_state) optimizer->load_state(*opt_state);

  std::vector<std::size_t> all_items(task.train.size());
  for (std::size_t i = 0; i < all_items.size(); ++i) all_items[i] = i;

  for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = scheduled_lr(config, epoch);
    if (optimizer) optimizer->set_lr(rec.lr);
    const auto plan = maker.epoch_plan(epoch);
    double loss_sum = 0.0;
    std::size_t loss_items = 0;
    for (std::size_t b = 0; b < plan.size(); ++b) {
      const Batch batch = maker.make(plan[b], epoch, b);
      const auto logp = model.forward(batch.inputs, true);
      const auto loss = nn::nll_loss(logp, std::span<const int>(batch.labels));
      const float value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss " + std::to_string(value) + " at epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(b) + " (lr " +
                            std::to_string(rec.lr) + ")");
      }
      if (optimizer) {
        optimizer->zero_grad();
        nn::backward(loss);
        optimizer->step();
      }
      loss_sum += static_cast<double>(value) * static_cast<double>(plan[b].size());
      loss_items += plan[b].size();
    }
    rec.loss = loss_sum / static_cast<double>(std::max<std::size_t>(loss_items, 1));

    const infer::Classifier classifier(model.clone(), frontend);
    if (config.stop_train_accuracy > 0.0) {
      std::vector<int> truth;
      for (const auto& e : task.train) truth.push_back(e.label);
      rec.train_accuracy = eval::accuracy(eval::predict(classifier, task.train), truth);
    }
    if (task.dev) rec.dev_metric = task.dev->fn(classifier);
    result.log.push_back(rec);

    const bool higher_better = task.dev ? task.dev->higher_is_better : true;
    const double score = task.dev ? *rec.dev_metric : -rec.loss;
    const bool improved = !best_score || (higher_better ? score > *best_score : score < *best_score);
    if (improved) {
      best_score = score;
      result.best_epoch = epoch;
    }

    const fs::path ckpt = out_dir / ("ckpt-" + std::to_string(epoch) + ".bundle");
    models::export_bundle(models::make_bundle(model, task.frontend, stats, task.task, task.labels,
                                              task.vocabulary, task.inference),
                          ckpt);
    if (optimizer) models::save_optimizer_state(optimizer->state(), ckpt);
    json state{{"epoch", epoch},
               {"best_epoch", result.best_epoch},
               {"best_score", *best_score},
               {"config", config},
               {"log", result.log}};
    write_text(ckpt / "trainer.json", state.dump(2) + "\n");
    if (improved) {
      const fs::path best = out_dir / "best.bundle";
      fs::remove_all(best);
      fs::copy(ckpt, best, fs::copy_options::recursive);
    }
    write_text(out_dir / "train_log.jsonl", log_lines(result.log));
    result.last_checkpoint = ckpt;

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("epoch {} lr {:.3g} loss {:.4f}{}{} ({:.1f} s)", epoch, rec.lr, rec.loss,
                 rec.train_accuracy ? fmt::format(" train_acc {:.4f}", *rec.train_accuracy) : "",
                 rec.dev_metric ? fmt::format(" {} {:.4f}", task.dev->name, *rec.dev_metric) : "",
                 secs);

    if (config.stop_train_accuracy > 0.0 && *rec.train_accuracy >= config.stop_train_accuracy) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_score = best_score.value_or(0.0);
  result.best_bundle = out_dir / "best.bundle";
  return result;
}

}  // namespace ww::train
