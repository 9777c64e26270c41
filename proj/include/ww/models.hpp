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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ww/error.hpp"
#include "ww/tensor.hpp"

namespace ww::models {

struct Res8Config {
  std::size_t n_labels = 12;
  std::size_t n_maps = 45;
  std::size_t pool_time = 4;
  std::size_t pool_freq = 3;
  std::size_t n_blocks = 3;

  bool operator==(const Res8Config&) const = default;
};

void to_json(nlohmann::json& j, const Res8Config& c);
void from_json(const nlohmann::json& j, Res8Config& c);

/// A named tensor owned by a model. Parameters are trained; buffers hold
/// state such as batchnorm running statistics.
template <typename T>
struct NamedTensor {
  std::string name;
  nn::Tensor<T> tensor;
};

/// Residual CNN keyword classifier:
///   conv3x3(1 -> maps, bias) -> relu -> avgpool(4x3)
///   -> n_blocks x [conv-bn-relu, conv-bn, + skip, relu]
///   -> global average pool -> linear(maps -> labels) -> log_softmax.
/// Input is [N, 1, frames, mel_bands]; output is [N, labels] log-probs.
template <typename T>
class Res8 {
 public:
  explicit Res8(const Res8Config& config, uint64_t seed = 0);

  const Res8Config& config() const { return config_; }
  static constexpr const char* kArch = "res8";

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training);

  /// Trainable tensors in a fixed order.
  std::vector<NamedTensor<T>> parameters() const;
  std::vector<NamedTensor<T>> buffers() const;
  std::vector<nn::Tensor<T>> parameter_tensors() const;

  std::size_t parameter_count() const;

  /// Copies values from `other` (shapes must match), e.g. float -> double.
  template <typename U>
  void copy_from(const Res8<U>& other);

  /// Deep copy with fresh storage.
  Res8 clone() const;

 private:
  struct Block {
    nn::Tensor<T> conv1, gamma1, beta1, conv2, gamma2, beta2;
    nn::BatchNormState<T> bn1, bn2;
  };

  Res8Config config_;
  nn::Tensor<T> conv0_w_, conv0_b_;
  std::vector<Block> blocks_;
  nn::Tensor<T> out_w_, out_b_;
};

extern template class Res8<float>;
extern template class Res8<double>;

template <typename T>
template <typename U>
void Res8<T>::copy_from(const Res8<U>& other) {
  auto dst = parameters();
  auto src = other.parameters();
  auto dst_b = buffers();
  auto src_b = other.buffers();
  dst.insert(dst.end(), dst_b.begin(), dst_b.end());
  for (const auto& s : src_b) src.push_back({s.name, s.tensor});
  if (src.size() != dst.size()) throw DimensionError("res8 copy: tensor lists differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].tensor.shape() != src[i].tensor.shape()) {
      throw DimensionError("res8 copy: shape mismatch for " + dst[i].name);
    }
    auto out = dst[i].tensor.data();
    const auto in = src[i].tensor.data();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<T>(in[j]);
  }
}

}  // namespace ww::models
