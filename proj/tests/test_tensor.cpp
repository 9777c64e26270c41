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

#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ww/error.hpp"
#include "ww/optim.hpp"
#include "ww/random.hpp"
#include "ww/tensor.hpp"

namespace nn = ww::nn;
using TD = nn::Tensor<double>;
using TF = nn::Tensor<float>;

TEST_CASE("relu values and gradient mask") {
  TD x({2}, {-1.0, 2.0}, true);
  auto y = nn::relu(x);
  CHECK(y.values() == std::vector<double>{0.0, 2.0});
  nn::backward(nn::sum(y));
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("conv2d of ones with padding 1 has center 9") {
  const auto x = TF::full({1, 1, 3, 3}, 1.0f);
  const auto k = TF::full({1, 1, 3, 3}, 1.0f);
  const auto y = nn::conv2d(x, k, TF(), {1, 1});
  REQUIRE(y.shape() == nn::Shape{1, 1, 3, 3});
  CHECK(y.values()[4] == 9.0f);
  CHECK(y.values()[0] == 4.0f);
  CHECK(y.values()[1] == 6.0f);
}

TEST_CASE("simple gradients") {
  TD w({3}, {0.5, -1.0, 2.0}, true);
  nn::backward(nn::sum(w));
  CHECK(std::vector<double>(w.grad().begin(), w.grad().end()) == std::vector<double>{1, 1, 1});
  TD v = TD::scalar(2.0, true);
  nn::backward(nn::mul(v, v));
  CHECK(v.grad()[0] == 4.0);
}

TEST_CASE("backward rejects a non-scalar loss") {
  TD w({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(nn::backward(w), ww::DimensionError);
}

TEST_CASE("backward runs in exact reverse creation order") {
  TD a({2}, {1.0, 2.0}, true);
  auto b = nn::relu(a);
  auto c = nn::scale(b, 3.0);
  auto d = nn::add(c, b);
  std::vector<std::string> trace;
  nn::backward(nn::sum(d), &trace);
  CHECK(trace == std::vector<std::string>{"sum", "add", "scale", "relu"});
  CHECK(a.grad()[0] == 4.0);
}

TEST_CASE("shape mismatches name both shapes") {
  TD a({2, 3}, std::vector<double>(6), false), b({3, 2}, std::vector<double>(6), false);
  try {
    nn::add(a, b);
    FAIL("expected a dimension error");
  } catch (const ww::DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(nn::shape_string(a.shape())) != std::string::npos);
    CHECK(msg.find(nn::shape_string(b.shape())) != std::string::npos);
  }
  CHECK_THROWS_AS(nn::matmul(a, a), ww::DimensionError);
  CHECK_THROWS_AS(TD({2, 2}, {1.0}), ww::DimensionError);
}

TEST_CASE("every op passes finite-difference checks") {
  for (const auto& op : gradcheck::ops()) {
    CAPTURE(op.name);
    const auto r = gradcheck::check(op, 1234, 5);
    CHECK(r.checked == 5);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("conv2d matches the naive oracle") {
  ww::Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = gradcheck::pick(rng, 1, 2), c = gradcheck::pick(rng, 1, 4);
    const std::size_t o = gradcheck::pick(rng, 1, 4), kh = gradcheck::pick(rng, 1, 3);
    const std::size_t kw = gradcheck::pick(rng, 1, 3);
    const std::size_t h = gradcheck::pick(rng, kh, 9), w = gradcheck::pick(rng, kw, 9);
    const std::size_t stride = gradcheck::pick(rng, 1, 2), pad = gradcheck::pick(rng, 0, 2);
    const auto x = gradcheck::random(rng, {n, c, h, w}, false);
    const auto k = gradcheck::random(rng, {o, c, kh, kw}, false);
    const auto b = gradcheck::random(rng, {o}, false);
    const auto y = nn::conv2d(x, k, b, {stride, pad});
    std::size_t oh = 0, ow = 0;
    const auto ref = oracle::conv2d(x.values(), n, c, h, w, k.values(), o, kh, kw, &b.values(),
                                    stride, pad, oh, ow);
    REQUIRE(y.shape() == nn::Shape{n, o, oh, ow});
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(std::abs(y.values()[i] - ref[i]) <= 1e-5);
    }
  }
}

TEST_CASE("gemm honours transposes and accumulation") {
  const std::vector<double> a = {1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> b = {1, 0, 0, 1, 1, 1};  // 3x2
  std::vector<double> c(4, 10.0);
  nn::gemm(false, false, 2, 2, 3, a.data(), b.data(), c.data(), false);
  CHECK(c == std::vector<double>{4, 5, 10, 11});
  nn::gemm(false, false, 2, 2, 3, a.data(), b.data(), c.data(), true);
  CHECK(c == std::vector<double>{8, 10, 20, 22});
  // a^T (3x2) x a (2x3) would be 3x3; check one entry of a x a^T instead.
  std::vector<double> d(4);
  nn::gemm(false, true, 2, 2, 3, a.data(), a.data(), d.data(), false);
  CHECK(d == std::vector<double>{14, 32, 32, 77});
  std::vector<double> e(9);
  nn::gemm(true, false, 3, 3, 2, a.data(), a.data(), e.data(), false);
  CHECK(e[0] == 17);
  CHECK(e[8] == 45);
}

TEST_CASE("batchnorm eval mode is a deterministic affine map") {
  ww::Rng rng(2);
  nn::BatchNormState<float> st;
  st.running_mean = TF({2}, {0.5f, -1.0f});
  st.running_var = TF({2}, {4.0f, 0.25f});
  const TF g({2}, {2.0f, 1.0f}), b({2}, {0.0f, 1.0f});
  const TF x({1, 2, 1, 2}, {1.5f, 2.5f, -1.0f, 0.0f});
  const auto y1 = nn::batchnorm2d(x, g, b, st, false);
  const auto y2 = nn::batchnorm2d(x, g, b, st, false);
  CHECK(y1.values() == y2.values());
  CHECK(y1.values()[0] == doctest::Approx(2.0 * 1.0 / std::sqrt(4.0 + 1e-5)));
  CHECK(y1.values()[2] == doctest::Approx(1.0));
  CHECK(st.running_mean.values() == std::vector<float>{0.5f, -1.0f});
}

TEST_CASE("batchnorm training updates running statistics") {
  nn::BatchNormState<double> st;
  st.running_mean = TD::zeros({1});
  st.running_var = TD::full({1}, 1.0);
  const TD x({2, 1, 1, 2}, {1, 2, 3, 6});
  nn::batchnorm2d(x, TD::full({1}, 1.0), TD::zeros({1}), st, true);
  // mean 3, unbiased var 14/3.
  CHECK(st.running_mean.values()[0] == doctest::Approx(0.3));
  CHECK(st.running_var.values()[0] == doctest::Approx(0.9 + 0.1 * 14.0 / 3.0));
}

TEST_CASE("NoGradGuard records nothing") {
  TD a({1}, {2.0}, true);
  nn::NoGradGuard guard;
  CHECK_FALSE(nn::grad_enabled());
  const auto y = nn::mul(a, a);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("sgd step") {
  TD w({1}, {1.0}, true);
  nn::Sgd<double> opt({w}, 0.1);
  w.grad()[0] = 1.0;
  opt.step();
  CHECK(w.values()[0] == doctest::Approx(0.9));
  // Momentum 0.9: second step moves by lr * (0.9 * 1 + 1).
  TD m({1}, {1.0}, true);
  nn::Sgd<double> mom({m}, 0.1, 0.9);
  m.grad()[0] = 1.0;
  mom.step();
  mom.step();
  CHECK(m.values()[0] == doctest::Approx(1.0 - 0.1 - 0.19));
  CHECK_THROWS_AS(nn::Sgd<double>({w}, 0.0), ww::ConfigError);
}

TEST_CASE("weight decay zero matches the plain path exactly") {
  TD a({2}, {0.3, -0.7}, true), b({2}, {0.3, -0.7}, true);
  nn::Adam<double> oa({a}, 0.01), ob({b}, 0.01, 0.9, 0.999, 1e-8, 0.0);
  for (int i = 0; i < 3; ++i) {
    a.grad()[0] = b.grad()[0] = 0.5 * i;
    a.grad()[1] = b.grad()[1] = -0.25;
    oa.step();
    ob.step();
  }
  CHECK(a.values() == b.values());
}

TEST_CASE("adam first step moves by about lr") {
  TD w({2}, {1.0, 1.0}, true);
  nn::Adam<double> opt({w}, 0.01);
  w.grad()[0] = 1.0;
  w.grad()[1] = -3.0;
  opt.step();
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(w.values()[0] == doctest::Approx(1.0 - 0.01 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(w.values()[1] == doctest::Approx(1.0 + 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("optimizer state round-trips") {
  TF a({3}, {1, 2, 3}, true), b({3}, {1, 2, 3}, true);
  nn::Adam<float> oa({a}, 0.1);
  for (int i = 0; i < 2; ++i) {
    a.grad()[0] = 1;
    a.grad()[2] = -1;
    oa.step();
  }
  b.values() = a.values();
  nn::Adam<float> ob({b}, 0.1);
  ob.load_state(oa.state());
  a.grad()[1] = 0.5f;
  for (std::size_t i = 0; i < 3; ++i) b.grad()[i] = a.grad()[i];
  oa.step();
  ob.step();
  CHECK(a.values() == b.values());
  nn::Sgd<float> sgd({a}, 0.1);
  CHECK_THROWS_AS(sgd.load_state(oa.state()), ww::FormatError);
}
