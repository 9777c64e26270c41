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
#include <memory>
#include <string>
#include <vector>

#include "ww/tensor.hpp"

namespace ww::nn {

/// Flattened optimizer state (moment buffers and step count) for checkpoints.
struct OptimizerState {
  std::string kind;
  uint64_t step = 0;
  std::vector<std::vector<float>> buffers;
};

template <typename T>
class Optimizer {
 public:
  Optimizer(std::vector<Tensor<T>> params, double lr);
  virtual ~Optimizer() = default;

  virtual void step() = 0;
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr);

  virtual OptimizerState state() const = 0;
  virtual void load_state(const OptimizerState& s) = 0;

 protected:
  std::vector<Tensor<T>> params_;
  double lr_;
};

/// p -= lr * v with v = momentum * v + (g + weight_decay * p).
template <typename T>
class Sgd : public Optimizer<T> {
 public:
  Sgd(std::vector<Tensor<T>> params, double lr, double momentum = 0.0,
      double weight_decay = 0.0);
  void step() override;
  OptimizerState state() const override;
  void load_state(const OptimizerState& s) override;

 private:
  double momentum_, weight_decay_;
  std::vector<std::vector<T>> velocity_;
  uint64_t steps_ = 0;
};

/// Bias-corrected Adam.
template <typename T>
class Adam : public Optimizer<T> {
 public:
  Adam(std::vector<Tensor<T>> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8, double weight_decay = 0.0);
  void step() override;
  OptimizerState state() const override;
  void load_state(const OptimizerState& s) override;

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::vector<std::vector<T>> m_, v_;
  uint64_t t_ = 0;
};

}  // namespace ww::nn
