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

#include "ww/bundle.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "ww/error.hpp"

namespace ww::models {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_f32(std::vector<unsigned char>& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

float get_f32(const unsigned char* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) |
                        (static_cast<uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::vector<unsigned char> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, std::span<const unsigned char> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + p.string());
}

json inference_to_json(const InferenceSettings& s) {
  return {{"window_s", s.window_s},   {"stride_s", s.stride_s},
          {"smoothing", s.smoothing}, {"tau_s", s.tau_s},
          {"refractory_s", s.refractory_s}, {"threshold", s.threshold}};
}

InferenceSettings inference_from_json(const json& j) {
  InferenceSettings s;
  s.window_s = j.at("window_s").get<double>();
  s.stride_s = j.at("stride_s").get<double>();
  s.smoothing = j.at("smoothing").get<std::size_t>();
  s.tau_s = j.at("tau_s").get<double>();
  s.refractory_s = j.at("refractory_s").get<double>();
  s.threshold = j.at("threshold").get<double>();
  return s;
}

}  // namespace

uint32_t crc32(std::span<const unsigned char> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed in chunks for very large blobs.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, n);
    pos += n;
  }
  return static_cast<uint32_t>(crc);
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) {
    if (!t.buffer) n += t.values.size();
  }
  return n;
}

ModelBundle make_bundle(const Res8<float>& model, const features::FrontendConfig& frontend,
                        const features::DatasetStats& stats, std::string task,
                        std::vector<std::string> labels, std::vector<std::string> vocabulary,
                        const InferenceSettings& inference) {
  if (labels.size() != model.config().n_labels) {
    throw ConfigError("bundle: " + std::to_string(labels.size()) + " label names for a model with " +
                      std::to_string(model.config().n_labels) + " outputs");
  }
  ModelBundle b;
  b.arch = Res8<float>::kArch;
  b.config = model.config();
  for (const auto& p : model.parameters()) {
    b.tensors.push_back({p.name, p.tensor.shape(), false, p.tensor.values()});
  }
  for (const auto& p : model.buffers()) {
    b.tensors.push_back({p.name, p.tensor.shape(), true, p.tensor.values()});
  }
  b.frontend = frontend;
  b.stats = stats;
  b.task = std::move(task);
  b.labels = std::move(labels);
  b.vocabulary = std::move(vocabulary);
  b.inference = inference;
  return b;
}

void export_bundle(const ModelBundle& bundle, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create bundle directory " + dir.string() + ": " + ec.message());

  std::vector<unsigned char> blob;
  json table = json::array();
  std::size_t offset = 0;
  // Parameters first, then buffers, each in model order.
  for (bool buffers : {false, true}) {
    for (const auto& t : bundle.tensors) {
      if (t.buffer != buffers) continue;
      if (nn::numel(t.shape) != t.values.size()) {
        throw DimensionError("bundle: tensor " + t.name + " has " +
                             std::to_string(t.values.size()) + " values for shape " +
                             nn::shape_string(t.shape));
      }
      table.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"len", t.values.size()},
                       {"kind", t.buffer ? "buffer" : "parameter"}});
      for (float v : t.values) put_f32(blob, v);
      offset += t.values.size();
    }
  }

  json manifest{{"format_version", kBundleFormatVersion},
                {"arch", bundle.arch},
                {"config", bundle.config},
                {"params", table},
                {"param_count", bundle.parameter_count()},
                {"total_floats", offset},
                {"frontend", bundle.frontend},
                {"stats", bundle.stats},
                {"task", bundle.task},
                {"labels", bundle.labels},
                {"vocabulary", bundle.vocabulary},
                {"inference", inference_to_json(bundle.inference)},
                {"blob", "params.bin"},
                {"blob_bytes", blob.size()},
                {"crc32", crc32(blob)}};
  write_file(dir / "params.bin", blob);
  const std::string text = manifest.dump(2) + "\n";
  write_file(dir / "manifest.json",
             {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

ModelBundle import_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json m;
  try {
    const auto bytes = read_file(manifest_path);
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  try {
    const int version = m.at("format_version").get<int>();
    if (version != kBundleFormatVersion) {
      throw VersionError(manifest_path.string() + ": bundle format version " +
                         std::to_string(version) + ", this build reads version " +
                         std::to_string(kBundleFormatVersion));
    }
    ModelBundle b;
    b.arch = m.at("arch").get<std::string>();
    if (b.arch != Res8<float>::kArch) {
      throw UnsupportedError(manifest_path.string() + ": unknown architecture '" + b.arch + "'");
    }
    b.config = m.at("config").get<Res8Config>();
    b.frontend = m.at("frontend").get<features::FrontendConfig>();
    b.stats = m.at("stats").get<features::DatasetStats>();
    b.task = m.at("task").get<std::string>();
    b.labels = m.at("labels").get<std::vector<std::string>>();
    b.vocabulary = m.at("vocabulary").get<std::vector<std::string>>();
    b.inference = inference_from_json(m.at("inference"));

    const fs::path blob_path = dir / m.value("blob", std::string("params.bin"));
    const auto blob = read_file(blob_path);
    const auto expected_bytes = m.at("blob_bytes").get<std::size_t>();
    if (blob.size() != expected_bytes) {
      throw ChecksumError(blob_path.string() + ": blob has " + std::to_string(blob.size()) +
                          " bytes, manifest says " + std::to_string(expected_bytes));
    }
    const auto expected_crc = m.at("crc32").get<uint32_t>();
    if (crc32(blob) != expected_crc) {
      throw ChecksumError(blob_path.string() + ": CRC-32 mismatch");
    }
    for (const auto& e : m.at("params")) {
      BundleTensor t;
      t.name = e.at("name").get<std::string>();
      t.shape = e.at("shape").get<nn::Shape>();
      t.buffer = e.value("kind", std::string("parameter")) == "buffer";
      const auto offset = e.at("offset").get<std::size_t>();
      const auto len = e.at("len").get<std::size_t>();
      if (len != nn::numel(t.shape) || (offset + len) * 4 > blob.size()) {
        throw FormatError(manifest_path.string() + ": bad table entry for " + t.name);
      }
      t.values.resize(len);
      for (std::size_t i = 0; i < len; ++i) t.values[i] = get_f32(blob.data() + 4 * (offset + i));
      b.tensors.push_back(std::move(t));
    }
    return b;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

Res8<float> instantiate(const ModelBundle& bundle) {
  if (bundle.arch != Res8<float>::kArch) {
    throw UnsupportedError("cannot instantiate architecture '" + bundle.arch + "'");
  }
  Res8<float> model(bundle.config);
  auto targets = model.parameters();
  const auto bufs = model.buffers();
  targets.insert(targets.end(), bufs.begin(), bufs.end());
  for (auto& target : targets) {
    const auto it = std::find_if(bundle.tensors.begin(), bundle.tensors.end(),
                                 [&](const BundleTensor& t) { return t.name == target.name; });
    if (it == bundle.tensors.end()) throw FormatError("bundle lacks tensor " + target.name);
    if (it->shape != target.tensor.shape()) {
      throw DimensionError("bundle tensor " + target.name + " has shape " +
                           nn::shape_string(it->shape) + ", model expects " +
                           nn::shape_string(target.tensor.shape()));
    }
    std::copy(it->values.begin(), it->values.end(), target.tensor.data().begin());
  }
  return model;
}

void save_optimizer_state(const nn::OptimizerState& s, const fs::path& dir) {
  std::vector<unsigned char> blob;
  json sizes = json::array();
  for (const auto& b : s.buffers) {
    sizes.push_back(b.size());
    for (float v : b) put_f32(blob, v);
  }
  write_file(dir / "optimizer.bin", blob);
  const std::string text =
      json{{"kind", s.kind}, {"step", s.step}, {"sizes", sizes}, {"crc32", crc32(blob)}}.dump(2);
  write_file(dir / "optimizer.json",
             {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

nn::OptimizerState load_optimizer_state(const fs::path& dir) {
  const auto meta_bytes = read_file(dir / "optimizer.json");
  json meta;
  try {
    meta = json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const json::exception& e) {
    throw FormatError((dir / "optimizer.json").string() + ": " + e.what());
  }
  const auto blob = read_file(dir / "optimizer.bin");
  if (crc32(blob) != meta.at("crc32").get<uint32_t>()) {
    throw ChecksumError((dir / "optimizer.bin").string() + ": CRC-32 mismatch");
  }
  nn::OptimizerState s;
  s.kind = meta.at("kind").get<std::string>();
  s.step = meta.at("step").get<uint64_t>();
  std::size_t pos = 0;
  for (const auto& n : meta.at("sizes")) {
    const auto len = n.get<std::size_t>();
    if ((pos + len) * 4 > blob.size()) throw ChecksumError("optimizer.bin is truncated");
    std::vector<float> buf(len);
    for (std::size_t i = 0; i < len; ++i) buf[i] = get_f32(blob.data() + 4 * (pos + i));
    pos += len;
    s.buffers.push_back(std::move(buf));
  }
  return s;
}

}  // namespace ww::models
