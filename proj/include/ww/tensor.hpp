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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ww::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_string(const Shape& s);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  uint64_t seq = 0;  // creation order; backward runs in decreasing seq
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void()> backward;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Shared handle to a value in the autodiff graph. Copies alias the same
/// storage; use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; zeros if nothing has been accumulated yet.
  std::span<T> grad() { return node_->ensure_grad(); }
  std::span<const T> grad() const { return node_->ensure_grad(); }
  void zero_grad();

  T item() const;
  const char* op() const { return node_->op; }

  Tensor clone() const;
  /// Same values, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Accumulates d(loss)/d(x) into every tracked tensor reachable from `loss`.
/// Recorded operations run in exact reverse creation order. When `trace` is
/// non-null it receives the op name of each backward step in execution order.
template <typename T>
void backward(const Tensor<T>& loss, std::vector<std::string>* trace = nullptr);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> relu(const Tensor<T>& a);

/// [M, K] x [K, N] -> [M, N].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x [N, in], weight [out, in], optional bias [out] -> [N, out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation with zero padding. x [N, C, H, W], weight [O, C, kh, kw],
/// optional bias [O].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opt = {});

/// Running statistics owned by a batchnorm layer (not trained by gradient).
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
};

/// Per-channel normalization of [N, C, H, W]. Training mode normalizes with
/// batch statistics and updates the running estimates (unbiased variance);
/// eval mode uses the running estimates.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, bool training);

/// Non-overlapping when stride equals the kernel (the default).
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t kh, std::size_t kw,
                     std::size_t sh = 0, std::size_t sw = 0);

/// [N, C, H, W] -> [N, C].
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

/// Along the last axis of [N, C].
template <typename T> Tensor<T> log_softmax(const Tensor<T>& x);

/// Mean over the batch of -log_probs[i, labels[i]].
template <typename T>
Tensor<T> nll_loss(const Tensor<T>& log_probs, std::span<const int> labels);

/// C[M,N] (+)= op(A) op(B); row-major, fixed summation order.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate);

}  // namespace ww::nn
