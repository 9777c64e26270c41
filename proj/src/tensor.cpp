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

#include "ww/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "ww/error.hpp"

namespace ww::nn {

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_string(const Shape& s) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? ", " : "") << s[i];
  out << ')';
  return out.str();
}

namespace {

std::atomic<uint64_t> g_seq{0};
thread_local bool t_grad_enabled = true;

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) +
                       " and " + shape_string(b));
}

void expect_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " input, got " + shape_string(s));
  }
}

template <typename T>
std::shared_ptr<Node<T>> new_node(Shape shape, std::vector<T> value, const char* op,
                                  std::initializer_list<const Tensor<T>*> inputs) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  if (t_grad_enabled) {
    for (const Tensor<T>* in : inputs) {
      if (in && in->defined() && in->requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      for (const Tensor<T>* in : inputs) {
        if (in && in->defined()) node->inputs.push_back(in->node());
      }
    }
  }
  return node;
}

template <typename T>
bool wants_grad(const Tensor<T>& t) {
  return t.defined() && t.requires_grad();
}

}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  if (nn::numel(shape) != data.size()) {
    throw DimensionError("tensor: shape " + shape_string(shape) + " holds " +
                         std::to_string(nn::numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  node_ = std::make_shared<Node<T>>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
  node_->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = nn::numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = nn::numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw DimensionError("item(): tensor of shape " + shape_string(shape()) +
                         " is not a scalar");
  }
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out(shape(), values(), requires_grad());
  if (has_grad()) out.node_->grad = node_->grad;
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), values(), false);
}

template <typename T>
void backward(const Tensor<T>& loss, std::vector<std::string>* trace) {
  if (loss.numel() != 1) {
    throw DimensionError("backward: loss must be a scalar, got shape " +
                         shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ConfigError("backward: loss is not connected to any tracked tensor");
  }
  std::vector<Node<T>*> order;
  std::vector<Node<T>*> stack{loss.node().get()};
  std::vector<const Node<T>*> seen;
  auto visited = [&](const Node<T>* n) {
    return std::find(seen.begin(), seen.end(), n) != seen.end();
  };
  // Graphs here are small (tens of nodes), so a linear visited list is fine.
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    if (visited(n)) continue;
    seen.push_back(n);
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && !visited(in.get())) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq > b->seq; });
  loss.node()->ensure_grad()[0] += T(1);
  for (Node<T>* n : order) {
    if (!n->backward || n->grad.empty()) continue;
    n->backward();
    if (trace) trace->push_back(n->op);
  }
}

// ---------------------------------------------------------------------------
// GEMM

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate) {
  std::vector<T> bt;
  if (trans_b) {
    // B is stored n x k; make it k x n so the inner loop runs contiguously.
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    b = bt.data();
  }
  if (!accumulate) std::fill(c, c + m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = trans_a ? a[p * m + i] : a[i * k + p];
      const T* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
  auto node = new_node<T>(a.shape(), std::move(v), "add", {&a, &b});
  if (node->requires_grad) {
    auto na = a.node(), nb = b.node();
    Node<T>* out = node.get();
    node->backward = [na, nb, out] {
      for (auto* in : {na.get(), nb.get()}) {
        if (!in->requires_grad) continue;
        auto& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out->grad[i];
      }
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
  auto node = new_node<T>(a.shape(), std::move(v), "mul", {&a, &b});
  if (node->requires_grad) {
    auto na = a.node(), nb = b.node();
    Node<T>* out = node.get();
    node->backward = [na, nb, out] {
      if (na->requires_grad) {
        auto& g = na->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out->grad[i] * nb->value[i];
      }
      if (nb->requires_grad) {
        auto& g = nb->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out->grad[i] * na->value[i];
      }
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * s;
  auto node = new_node<T>(a.shape(), std::move(v), "scale", {&a});
  if (node->requires_grad) {
    auto na = a.node();
    Node<T>* out = node.get();
    node->backward = [na, out, s] {
      auto& g = na->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out->grad[i] * s;
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (T x : a.values()) acc += x;
  auto node = new_node<T>(Shape{}, std::vector<T>{acc}, "sum", {&a});
  if (node->requires_grad) {
    auto na = a.node();
    Node<T>* out = node.get();
    node->backward = [na, out] {
      auto& g = na->ensure_grad();
      for (auto& x : g) x += out->grad[0];
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel()) shape_mismatch("reshape", a.shape(), shape);
  auto node = new_node<T>(std::move(shape), a.values(), "reshape", {&a});
  if (node->requires_grad) {
    auto na = a.node();
    Node<T>* out = node.get();
    node->backward = [na, out] {
      auto& g = na->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out->grad[i];
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] > T(0) ? a.values()[i] : T(0);
  auto node = new_node<T>(a.shape(), std::move(v), "relu", {&a});
  if (node->requires_grad) {
    auto na = a.node();
    Node<T>* out = node.get();
    node->backward = [na, out] {
      auto& g = na->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (na->value[i] > T(0)) g[i] += out->grad[i];
      }
    };
  }
  return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// Dense

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  expect_rank("matmul", a.shape(), 2);
  expect_rank("matmul", b.shape(), 2);
  if (a.dim(1) != b.dim(0)) shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> v(m * n);
  gemm<T>(false, false, m, n, k, a.values().data(), b.values().data(), v.data(), false);
  auto node = new_node<T>(Shape{m, n}, std::move(v), "matmul", {&a, &b});
  if (node->requires_grad) {
    auto na = a.node(), nb = b.node();
    Node<T>* out = node.get();
    node->backward = [na, nb, out, m, n, k] {
      if (na->requires_grad) {  // dA = dC B^T
        gemm<T>(false, true, m, k, n, out->grad.data(), nb->value.data(),
                na->ensure_grad().data(), true);
      }
      if (nb->requires_grad) {  // dB = A^T dC
        gemm<T>(true, false, k, n, m, na->value.data(), out->grad.data(),
                nb->ensure_grad().data(), true);
      }
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  expect_rank("linear", x.shape(), 2);
  expect_rank("linear", weight.shape(), 2);
  if (x.dim(1) != weight.dim(1)) shape_mismatch("linear", x.shape(), weight.shape());
  const std::size_t batch = x.dim(0), in = x.dim(1), out_f = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{out_f}) {
    shape_mismatch("linear (bias)", weight.shape(), bias.shape());
  }
  std::vector<T> v(batch * out_f);
  gemm<T>(false, true, batch, out_f, in, x.values().data(), weight.values().data(), v.data(),
          false);
  if (bias.defined()) {
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t o = 0; o < out_f; ++o) v[i * out_f + o] += bias.values()[o];
  }
  auto node = new_node<T>(Shape{batch, out_f}, std::move(v), "linear", {&x, &weight, &bias});
  if (node->requires_grad) {
    auto nx = x.node(), nw = weight.node();
    auto nbias = bias.defined() ? bias.node() : nullptr;
    Node<T>* out = node.get();
    node->backward = [nx, nw, nbias, out, batch, in, out_f] {
      if (nx->requires_grad) {  // dX = dY W
        gemm<T>(false, false, batch, in, out_f, out->grad.data(), nw->value.data(),
                nx->ensure_grad().data(), true);
      }
      if (nw->requires_grad) {  // dW = dY^T X
        gemm<T>(true, false, out_f, in, batch, out->grad.data(), nx->value.data(),
                nw->ensure_grad().data(), true);
      }
      if (nbias && nbias->requires_grad) {
        auto& g = nbias->ensure_grad();
        for (std::size_t i = 0; i < batch; ++i)
          for (std::size_t o = 0; o < out_f; ++o) g[o] += out->grad[i * out_f + o];
      }
    };
  }
  return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w, o, kh, kw, stride, pad, oh, ow;
  std::size_t ckk() const { return c * kh * kw; }
  std::size_t positions() const { return oh * ow; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t p = g.positions();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((ci * g.kh + ki) * g.kw + kj) * p;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                          ? T(0)
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  const std::size_t p = g.positions();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    T* plane = dx + ci * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((ci * g.kh + ki) * g.kw + kj) * p;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[static_cast<std::size_t>(ix)] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opt) {
  expect_rank("conv2d", x.shape(), 4);
  expect_rank("conv2d", weight.shape(), 4);
  if (x.dim(1) != weight.dim(1)) shape_mismatch("conv2d", x.shape(), weight.shape());
  if (opt.stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.o = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = opt.stride;
  g.pad = opt.padding;
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) {
    shape_mismatch("conv2d (kernel larger than padded input)", x.shape(), weight.shape());
  }
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  if (bias.defined() && bias.shape() != Shape{g.o}) {
    shape_mismatch("conv2d (bias)", weight.shape(), bias.shape());
  }

  const std::size_t p = g.positions(), ckk = g.ckk();
  const std::size_t in_stride = g.c * g.h * g.w, out_stride = g.o * p;
  std::vector<T> v(g.n * out_stride);
  std::vector<T> cols(ckk * p);
  for (std::size_t b = 0; b < g.n; ++b) {
    im2col(x.values().data() + b * in_stride, g, cols.data());
    T* out = v.data() + b * out_stride;
    gemm<T>(false, false, g.o, p, ckk, weight.values().data(), cols.data(), out, false);
    if (bias.defined()) {
      for (std::size_t o = 0; o < g.o; ++o) {
        const T bo = bias.values()[o];
        for (std::size_t i = 0; i < p; ++i) out[o * p + i] += bo;
      }
    }
  }

  auto node = new_node<T>(Shape{g.n, g.o, g.oh, g.ow}, std::move(v), "conv2d",
                          {&x, &weight, &bias});
  if (node->requires_grad) {
    auto nx = x.node(), nw = weight.node();
    auto nbias = bias.defined() ? bias.node() : nullptr;
    Node<T>* out = node.get();
    node->backward = [nx, nw, nbias, out, g] {
      const std::size_t p = g.positions(), ckk = g.ckk();
      const std::size_t in_stride = g.c * g.h * g.w, out_stride = g.o * p;
      std::vector<T> cols(ckk * p), dcols(ckk * p);
      for (std::size_t b = 0; b < g.n; ++b) {
        const T* dy = out->grad.data() + b * out_stride;
        if (nw->requires_grad) {
          im2col(nx->value.data() + b * in_stride, g, cols.data());
          gemm<T>(false, true, g.o, ckk, p, dy, cols.data(), nw->ensure_grad().data(), true);
        }
        if (nx->requires_grad) {
          gemm<T>(true, false, ckk, p, g.o, nw->value.data(), dy, dcols.data(), false);
          col2im_add(dcols.data(), g, nx->ensure_grad().data() + b * in_stride);
        }
        if (nbias && nbias->requires_grad) {
          auto& gb = nbias->ensure_grad();
          for (std::size_t o = 0; o < g.o; ++o) {
            T acc = T(0);
            for (std::size_t i = 0; i < p; ++i) acc += dy[o * p + i];
            gb[o] += acc;
          }
        }
      }
    };
  }
  return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, bool training) {
  expect_rank("batchnorm2d", x.shape(), 4);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const Shape channel{c};
  if (gamma.shape() != channel) shape_mismatch("batchnorm2d (gamma)", x.shape(), gamma.shape());
  if (beta.shape() != channel) shape_mismatch("batchnorm2d (beta)", x.shape(), beta.shape());
  if (state.running_mean.shape() != channel || state.running_var.shape() != channel) {
    shape_mismatch("batchnorm2d (running stats)", x.shape(), state.running_mean.shape());
  }
  const std::size_t count = n * hw;
  if (training && count < 2) {
    throw DimensionError("batchnorm2d: training needs more than one value per channel, got " +
                         shape_string(x.shape()));
  }

  const auto& xv = x.values();
  std::vector<T> mean_c(c), invstd(c);
  if (training) {
    auto& rm = state.running_mean.values();
    auto& rv = state.running_var.values();
    for (std::size_t ch = 0; ch < c; ++ch) {
      T s = T(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xv.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const T mu = s / static_cast<T>(count);
      T ss = T(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xv.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const T var = ss / static_cast<T>(count);
      mean_c[ch] = mu;
      invstd[ch] = T(1) / std::sqrt(var + state.eps);
      rm[ch] = (T(1) - state.momentum) * rm[ch] + state.momentum * mu;
      rv[ch] = (T(1) - state.momentum) * rv[ch] +
               state.momentum * ss / static_cast<T>(count - 1);
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean_c[ch] = state.running_mean.values()[ch];
      invstd[ch] = T(1) / std::sqrt(state.running_var.values()[ch] + state.eps);
    }
  }

  std::vector<T> xhat(xv.size()), v(xv.size());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * hw;
      const T gm = gamma.values()[ch], bt = beta.values()[ch];
      for (std::size_t i = 0; i < hw; ++i) {
        const T h = (xv[off + i] - mean_c[ch]) * invstd[ch];
        xhat[off + i] = h;
        v[off + i] = gm * h + bt;
      }
    }
  }

  auto node = new_node<T>(x.shape(), std::move(v), "batchnorm2d", {&x, &gamma, &beta});
  if (node->requires_grad) {
    auto nx = x.node(), ng = gamma.node(), nb = beta.node();
    Node<T>* out = node.get();
    node->backward = [nx, ng, nb, out, n, c, hw, count, training, xhat = std::move(xhat),
                      invstd = std::move(invstd)] {
      const auto& dy = out->grad;
      for (std::size_t ch = 0; ch < c; ++ch) {
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (std::size_t b = 0; b < n; ++b) {
          const std::size_t off = (b * c + ch) * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            sum_dy += dy[off + i];
            sum_dy_xhat += dy[off + i] * xhat[off + i];
          }
        }
        if (ng->requires_grad) ng->ensure_grad()[ch] += sum_dy_xhat;
        if (nb->requires_grad) nb->ensure_grad()[ch] += sum_dy;
        if (!nx->requires_grad) continue;
        auto& dx = nx->ensure_grad();
        const T gm = ng->value[ch];
        const T k = gm * invstd[ch];
        if (training) {
          const T inv_count = T(1) / static_cast<T>(count);
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              dx[off + i] += k * (dy[off + i] - inv_count * sum_dy -
                                  xhat[off + i] * inv_count * sum_dy_xhat);
            }
          }
        } else {
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) dx[off + i] += k * dy[off + i];
          }
        }
      }
    };
  }
  return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// Pooling

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t kh, std::size_t kw, std::size_t sh,
                     std::size_t sw) {
  expect_rank("avg_pool2d", x.shape(), 4);
  if (kh == 0 || kw == 0) throw ConfigError("avg_pool2d: kernel must be nonzero");
  if (sh == 0) sh = kh;
  if (sw == 0) sw = kw;
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < kh || w < kw) {
    throw DimensionError("avg_pool2d: input " + shape_string(x.shape()) +
                         " is smaller than the pooling window (" + std::to_string(kh) + ", " +
                         std::to_string(kw) + ")");
  }
  const std::size_t oh = (h - kh) / sh + 1, ow = (w - kw) / sw + 1;
  const T inv = T(1) / static_cast<T>(kh * kw);
  std::vector<T> v(n * c * oh * ow);
  const auto& xv = x.values();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* src = xv.data() + plane * h * w;
    T* dst = v.data() + plane * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T acc = T(0);
        for (std::size_t i = 0; i < kh; ++i)
          for (std::size_t j = 0; j < kw; ++j) acc += src[(oy * sh + i) * w + ox * sw + j];
        dst[oy * ow + ox] = acc * inv;
      }
  }
  auto node = new_node<T>(Shape{n, c, oh, ow}, std::move(v), "avg_pool2d", {&x});
  if (node->requires_grad) {
    auto nx = x.node();
    Node<T>* out = node.get();
    node->backward = [nx, out, n, c, h, w, oh, ow, kh, kw, sh, sw, inv] {
      auto& gx = nx->ensure_grad();
      for (std::size_t plane = 0; plane < n * c; ++plane) {
        T* dst = gx.data() + plane * h * w;
        const T* dy = out->grad.data() + plane * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const T g = dy[oy * ow + ox] * inv;
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) dst[(oy * sh + i) * w + ox * sw + j] += g;
          }
      }
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  expect_rank("global_avg_pool", x.shape(), 4);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  std::vector<T> v(n * c);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n * c; ++i) {
    T acc = T(0);
    for (std::size_t j = 0; j < hw; ++j) acc += xv[i * hw + j];
    v[i] = acc / static_cast<T>(hw);
  }
  auto node = new_node<T>(Shape{n, c}, std::move(v), "global_avg_pool", {&x});
  if (node->requires_grad) {
    auto nx = x.node();
    Node<T>* out = node.get();
    node->backward = [nx, out, n, c, hw] {
      auto& gx = nx->ensure_grad();
      for (std::size_t i = 0; i < n * c; ++i) {
        const T g = out->grad[i] / static_cast<T>(hw);
        for (std::size_t j = 0; j < hw; ++j) gx[i * hw + j] += g;
      }
    };
  }
  return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// Loss

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x) {
  expect_rank("log_softmax", x.shape(), 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<T> v(n * c);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = xv.data() + i * c;
    const T mx = *std::max_element(row, row + c);
    T s = T(0);
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const T lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = row[j] - lse;
  }
  auto node = new_node<T>(x.shape(), std::move(v), "log_softmax", {&x});
  if (node->requires_grad) {
    auto nx = x.node();
    Node<T>* out = node.get();
    node->backward = [nx, out, n, c] {
      auto& gx = nx->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        T s = T(0);
        for (std::size_t j = 0; j < c; ++j) s += out->grad[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          gx[i * c + j] += out->grad[i * c + j] - std::exp(out->value[i * c + j]) * s;
        }
      }
    };
  }
  return Tensor<T>(node);
}

template <typename T>
Tensor<T> nll_loss(const Tensor<T>& log_probs, std::span<const int> labels) {
  expect_rank("nll_loss", log_probs.shape(), 2);
  const std::size_t n = log_probs.dim(0), c = log_probs.dim(1);
  if (labels.size() != n) {
    throw DimensionError("nll_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(n));
  }
  if (n == 0) throw DimensionError("nll_loss: empty batch");
  std::vector<int> lab(labels.begin(), labels.end());
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (lab[i] < 0 || static_cast<std::size_t>(lab[i]) >= c) {
      throw DimensionError("nll_loss: label " + std::to_string(lab[i]) + " out of range [0, " +
                           std::to_string(c) + ")");
    }
    acc -= log_probs.values()[i * c + static_cast<std::size_t>(lab[i])];
  }
  auto node = new_node<T>(Shape{}, std::vector<T>{acc / static_cast<T>(n)}, "nll_loss",
                          {&log_probs});
  if (node->requires_grad) {
    auto np = log_probs.node();
    Node<T>* out = node.get();
    node->backward = [np, out, n, c, lab = std::move(lab)] {
      auto& g = np->ensure_grad();
      const T s = out->grad[0] / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i) g[i * c + static_cast<std::size_t>(lab[i])] -= s;
    };
  }
  return Tensor<T>(node);
}

// ---------------------------------------------------------------------------

#define WW_INSTANTIATE(T)                                                                 \
  template class Tensor<T>;                                                               \
  template void backward<T>(const Tensor<T>&, std::vector<std::string>*);                 \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, const T*,       \
                        const T*, T*, bool);                                              \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                       \
  template Tensor<T> sum<T>(const Tensor<T>&);                                            \
  template Tensor<T> mean<T>(const Tensor<T>&);                                           \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                 \
  template Tensor<T> relu<T>(const Tensor<T>&);                                           \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                               Conv2dOptions);                                            \
  template Tensor<T> batchnorm2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                    BatchNormState<T>&, bool);                            \
  template Tensor<T> avg_pool2d<T>(const Tensor<T>&, std::size_t, std::size_t,            \
                                   std::size_t, std::size_t);                             \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                \
  template Tensor<T> log_softmax<T>(const Tensor<T>&);                                    \
  template Tensor<T> nll_loss<T>(const Tensor<T>&, std::span<const int>);

WW_INSTANTIATE(float)
WW_INSTANTIATE(double)

#undef WW_INSTANTIATE

}  // namespace ww::nn
