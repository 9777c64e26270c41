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

#include <filesystem>
#include <string>
#include <vector>

#include "ww/features.hpp"
#include "ww/models.hpp"
#include "ww/optim.hpp"

namespace ww::models {

inline constexpr int kBundleFormatVersion = 1;

/// Streaming settings stored with a model so a bundle alone is enough to run
/// detection.
struct InferenceSettings {
  double window_s = 2.0;
  double stride_s = 0.2;
  std::size_t smoothing = 4;
  double tau_s = 1.5;
  double refractory_s = 1.0;
  double threshold = 0.5;

  bool operator==(const InferenceSettings&) const = default;
};

struct BundleTensor {
  std::string name;
  nn::Shape shape;
  bool buffer = false;  // false: trained parameter
  std::vector<float> values;
};

/// Everything needed to rebuild and run a model.
struct ModelBundle {
  std::string arch = "res8";
  Res8Config config;
  std::vector<BundleTensor> tensors;
  features::FrontendConfig frontend;
  features::DatasetStats stats;
  std::string task = "wake";            // "wake" or "commands"
  std::vector<std::string> labels;      // one name per output
  std::vector<std::string> vocabulary;  // wake phrase words, in order
  InferenceSettings inference;

  std::size_t parameter_count() const;
};

/// Snapshot of a float model plus metadata.
ModelBundle make_bundle(const Res8<float>& model, const features::FrontendConfig& frontend,
                        const features::DatasetStats& stats, std::string task,
                        std::vector<std::string> labels, std::vector<std::string> vocabulary,
                        const InferenceSettings& inference);

/// Writes `dir/manifest.json` and `dir/params.bin` (little-endian float32,
/// tensors concatenated in table order, parameters before buffers). The
/// manifest records each tensor's offset and length in floats and the
/// CRC-32 of the blob.
void export_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);

/// Reads and verifies a bundle. Throws VersionError on a format version it
/// does not understand and ChecksumError when the blob is truncated or its
/// CRC does not match.
ModelBundle import_bundle(const std::filesystem::path& dir);

/// Builds a model whose tensors hold the bundle's values.
Res8<float> instantiate(const ModelBundle& bundle);

/// Optimizer moments saved next to a checkpoint bundle (optimizer.bin).
void save_optimizer_state(const nn::OptimizerState& s, const std::filesystem::path& dir);
nn::OptimizerState load_optimizer_state(const std::filesystem::path& dir);

uint32_t crc32(std::span<const unsigned char> bytes);

}  // namespace ww::models
