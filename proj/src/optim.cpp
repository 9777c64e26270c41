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

#include "ww/optim.hpp"

#include <cmath>

#include "ww/error.hpp"

namespace ww::nn {

namespace {

void check_lr(double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive, got " + std::to_string(lr));
}

template <typename T>
std::vector<float> to_float(const std::vector<T>& v) {
  return std::vector<float>(v.begin(), v.end());
}

template <typename T>
void restore(std::vector<std::vector<T>>& dst, const OptimizerState& s, std::size_t first,
             std::size_t count) {
  if (s.buffers.size() < first + count) throw FormatError("optimizer state: missing buffers");
  for (std::size_t i = 0; i < count; ++i) {
    const auto& src = s.buffers[first + i];
    if (src.size() != dst[i].size()) throw FormatError("optimizer state: buffer size mismatch");
    dst[i].assign(src.begin(), src.end());
  }
}

}  // namespace

template <typename T>
Optimizer<T>::Optimizer(std::vector<Tensor<T>> params, double lr)
    : params_(std::move(params)), lr_(lr) {
  check_lr(lr);
}

template <typename T>
void Optimizer<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
void Optimizer<T>::set_lr(double lr) {
  check_lr(lr);
  lr_ = lr;
}

template <typename T>
Sgd<T>::Sgd(std::vector<Tensor<T>> params, double lr, double momentum, double weight_decay)
    : Optimizer<T>(std::move(params), lr), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : this->params_) velocity_.emplace_back(p.numel(), T(0));
}

template <typename T>
void Sgd<T>::step() {
  const T lr = static_cast<T>(this->lr_);
  const T mom = static_cast<T>(momentum_);
  const T wd = static_cast<T>(weight_decay_);
  for (std::size_t i = 0; i < this->params_.size(); ++i) {
    auto& p = this->params_[i];
    if (!p.has_grad()) continue;
    auto w = p.data();
    auto g = p.grad();
    auto& vel = velocity_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      T d = g[j];
      if (weight_decay_ != 0.0) d += wd * w[j];
      if (momentum_ != 0.0) {
        vel[j] = mom * vel[j] + d;
        d = vel[j];
      }
      w[j] -= lr * d;
    }
  }
  ++steps_;
}

template <typename T>
OptimizerState Sgd<T>::state() const {
  OptimizerState s{"sgd", steps_, {}};
  for (const auto& v : velocity_) s.buffers.push_back(to_float(v));
  return s;
}

template <typename T>
void Sgd<T>::load_state(const OptimizerState& s) {
  if (s.kind != "sgd") throw FormatError("optimizer state is '" + s.kind + "', expected sgd");
  restore(velocity_, s, 0, velocity_.size());
  steps_ = s.step;
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, double lr, double beta1, double beta2, double eps,
              double weight_decay)
    : Optimizer<T>(std::move(params), lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  for (const auto& p : this->params_) {
    m_.emplace_back(p.numel(), T(0));
    v_.emplace_back(p.numel(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const T c1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const T c2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const T lr = static_cast<T>(this->lr_);
  const T eps = static_cast<T>(eps_);
  const T wd = static_cast<T>(weight_decay_);
  for (std::size_t i = 0; i < this->params_.size(); ++i) {
    auto& p = this->params_[i];
    if (!p.has_grad()) continue;
    auto w = p.data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      T d = g[j];
      if (weight_decay_ != 0.0) d += wd * w[j];
      m[j] = b1 * m[j] + (T(1) - b1) * d;
      v[j] = b2 * v[j] + (T(1) - b2) * d * d;
      const T mhat = m[j] / c1;
      const T vhat = v[j] / c2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <typename T>
OptimizerState Adam<T>::state() const {
  OptimizerState s{"adam", t_, {}};
  for (const auto& m : m_) s.buffers.push_back(to_float(m));
  for (const auto& v : v_) s.buffers.push_back(to_float(v));
  return s;
}

template <typename T>
void Adam<T>::load_state(const OptimizerState& s) {
  if (s.kind != "adam") throw FormatError("optimizer state is '" + s.kind + "', expected adam");
  restore(m_, s, 0, m_.size());
  restore(v_, s, m_.size(), v_.size());
  t_ = s.step;
}

template class Optimizer<float>;
template class Optimizer<double>;
template class Sgd<float>;
template class Sgd<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace ww::nn
