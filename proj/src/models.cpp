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

#include "ww/models.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ww/error.hpp"
#include "ww/random.hpp"

namespace ww::models {

void to_json(nlohmann::json& j, const Res8Config& c) {
  j = nlohmann::json{{"n_labels", c.n_labels},   {"n_maps", c.n_maps},
                     {"pool_time", c.pool_time}, {"pool_freq", c.pool_freq},
                     {"n_blocks", c.n_blocks}};
}

void from_json(const nlohmann::json& j, Res8Config& c) {
  c.n_labels = j.at("n_labels").get<std::size_t>();
  c.n_maps = j.at("n_maps").get<std::size_t>();
  c.pool_time = j.value("pool_time", std::size_t{4});
  c.pool_freq = j.value("pool_freq", std::size_t{3});
  c.n_blocks = j.value("n_blocks", std::size_t{3});
}

namespace {

// Kaiming-uniform for relu: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
nn::Tensor<T> kaiming(nn::Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(nn::numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return nn::Tensor<T>(std::move(shape), std::move(v), true);
}

}  // namespace

template <typename T>
Res8<T>::Res8(const Res8Config& config, uint64_t seed) : config_(config) {
  if (config_.n_labels < 2) throw ConfigError("res8: need at least 2 labels");
  if (config_.n_maps == 0 || config_.pool_time == 0 || config_.pool_freq == 0) {
    throw ConfigError("res8: n_maps and pooling sizes must be positive");
  }
  Rng rng(seed);
  const std::size_t m = config_.n_maps;
  conv0_w_ = kaiming<T>({m, 1, 3, 3}, 9, rng);
  conv0_b_ = nn::Tensor<T>::zeros({m}, true);
  for (std::size_t i = 0; i < config_.n_blocks; ++i) {
    Block b;
    b.conv1 = kaiming<T>({m, m, 3, 3}, m * 9, rng);
    b.gamma1 = nn::Tensor<T>::full({m}, T(1), true);
    b.beta1 = nn::Tensor<T>::zeros({m}, true);
    b.conv2 = kaiming<T>({m, m, 3, 3}, m * 9, rng);
    b.gamma2 = nn::Tensor<T>::full({m}, T(1), true);
    b.beta2 = nn::Tensor<T>::zeros({m}, true);
    for (auto* bn : {&b.bn1, &b.bn2}) {
      bn->running_mean = nn::Tensor<T>::zeros({m});
      bn->running_var = nn::Tensor<T>::full({m}, T(1));
    }
    blocks_.push_back(std::move(b));
  }
  out_w_ = kaiming<T>({config_.n_labels, m}, m, rng);
  out_b_ = nn::Tensor<T>::zeros({config_.n_labels}, true);
}

template <typename T>
nn::Tensor<T> Res8<T>::forward(const nn::Tensor<T>& x, bool training) {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw DimensionError("res8: expected input [N, 1, frames, bands], got " +
                         nn::shape_string(x.shape()));
  }
  if (x.dim(2) < config_.pool_time || x.dim(3) < config_.pool_freq) {
    throw DimensionError("res8: input " + nn::shape_string(x.shape()) +
                         " is smaller than the " + std::to_string(config_.pool_time) + "x" +
                         std::to_string(config_.pool_freq) + " pooling window");
  }
  const nn::Conv2dOptions same{.stride = 1, .padding = 1};
  auto h = nn::relu(nn::conv2d(x, conv0_w_, conv0_b_, same));
  h = nn::avg_pool2d(h, config_.pool_time, config_.pool_freq);
  const nn::Tensor<T> no_bias;
  for (auto& b : blocks_) {
    auto y = nn::relu(nn::batchnorm2d(nn::conv2d(h, b.conv1, no_bias, same), b.gamma1, b.beta1,
                                      b.bn1, training));
    y = nn::batchnorm2d(nn::conv2d(y, b.conv2, no_bias, same), b.gamma2, b.beta2, b.bn2,
                        training);
    h = nn::relu(nn::add(y, h));
  }
  return nn::log_softmax(nn::linear(nn::global_avg_pool(h), out_w_, out_b_));
}

template <typename T>
std::vector<NamedTensor<T>> Res8<T>::parameters() const {
  std::vector<NamedTensor<T>> out{{"conv0.weight", conv0_w_}, {"conv0.bias", conv0_b_}};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    out.push_back({p + "conv1.weight", b.conv1});
    out.push_back({p + "bn1.weight", b.gamma1});
    out.push_back({p + "bn1.bias", b.beta1});
    out.push_back({p + "conv2.weight", b.conv2});
    out.push_back({p + "bn2.weight", b.gamma2});
    out.push_back({p + "bn2.bias", b.beta2});
  }
  out.push_back({"output.weight", out_w_});
  out.push_back({"output.bias", out_b_});
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Res8<T>::buffers() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    out.push_back({p + "bn1.running_mean", b.bn1.running_mean});
    out.push_back({p + "bn1.running_var", b.bn1.running_var});
    out.push_back({p + "bn2.running_mean", b.bn2.running_mean});
    out.push_back({p + "bn2.running_var", b.bn2.running_var});
  }
  return out;
}

template <typename T>
std::vector<nn::Tensor<T>> Res8<T>::parameter_tensors() const {
  std::vector<nn::Tensor<T>> out;
  for (auto& p : parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::size_t Res8<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
Res8<T> Res8<T>::clone() const {
  Res8 copy(config_);
  copy.copy_from(*this);
  return copy;
}

template class Res8<float>;
template class Res8<double>;

}  // namespace ww::models
