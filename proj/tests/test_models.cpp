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
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "ww/bundle.hpp"
#include "ww/error.hpp"
#include "ww/models.hpp"
#include "ww/random.hpp"

namespace nn = ww::nn;
namespace models = ww::models;
using nlohmann::json;

namespace {

nn::Tensor<float> random_input(std::size_t n, std::size_t t, std::size_t m, uint64_t seed) {
  ww::Rng rng(seed);
  std::vector<float> v(n * t * m);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return nn::Tensor<float>({n, 1, t, m}, std::move(v));
}

models::ModelBundle bundle_for(const models::Res8<float>& model) {
  ww::features::DatasetStats stats;
  stats.mean = -4.5;
  stats.std = 2.25;
  stats.count = 99;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < model.config().n_labels; ++i) labels.push_back("l" + std::to_string(i));
  return models::make_bundle(model, ww::features::FrontendConfig{}, stats, "commands", labels, {},
                             models::InferenceSettings{});
}

// Parameter count from the layer list, written out by hand.
std::size_t closed_form_count(std::size_t labels, std::size_t maps, std::size_t blocks) {
  const std::size_t conv0 = 9 * maps + maps;
  const std::size_t block = 2 * (9 * maps * maps + 2 * maps);
  const std::size_t head = maps * labels + labels;
  return conv0 + blocks * block + head;
}

}  // namespace

TEST_CASE("res8 parameter count") {
  const models::Res8<float> m12(models::Res8Config{});
  CHECK(m12.parameter_count() == 110892);
  CHECK(closed_form_count(12, 45, 3) == 110892);
  const models::Res8<float> m3(models::Res8Config{3});
  CHECK(m12.parameter_count() - m3.parameter_count() == 46 * 9);
  CHECK(m3.parameter_count() == 110892 - 552 + 138);
  std::size_t sum = 0;
  for (const auto& p : m12.parameters()) sum += p.tensor.numel();
  CHECK(sum == 110892);
  std::size_t buffers = 0;
  for (const auto& b : m12.buffers()) buffers += b.tensor.numel();
  CHECK(buffers == 6 * 2 * 45);
  for (std::size_t maps : {4, 8, 19}) {
    for (std::size_t labels : {2, 7}) {
      models::Res8Config c;
      c.n_labels = labels;
      c.n_maps = maps;
      CHECK(models::Res8<float>(c).parameter_count() == closed_form_count(labels, maps, 3));
    }
  }
}

TEST_CASE("res8 forward yields normalized log-probabilities") {
  models::Res8<float> model(models::Res8Config{}, 3);
  const auto y = model.forward(random_input(1, 101, 40, 1), false);
  REQUIRE(y.shape() == nn::Shape{1, 12});
  double total = 0;
  for (float v : y.values()) total += std::exp(static_cast<double>(v));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_THROWS_AS(model.forward(random_input(1, 3, 2, 1), false), ww::DimensionError);
  CHECK_THROWS_AS(model.forward(nn::Tensor<float>::zeros({1, 2, 8, 6}), false), ww::DimensionError);
}

TEST_CASE("eval forward is bit-identical across passes") {
  models::Res8<float> model(models::Res8Config{3, 8}, 5);
  const auto x = random_input(2, 98, 40, 2);
  CHECK(model.forward(x, false).values() == model.forward(x, false).values());
}

TEST_CASE("batch invariance in eval mode") {
  models::Res8<float> model(models::Res8Config{4, 8}, 6);
  // Move the running statistics off their defaults first.
  for (int i = 0; i < 3; ++i) model.forward(random_input(4, 40, 40, 10 + i), true);
  const auto batch = random_input(5, 40, 40, 3);
  const auto all = model.forward(batch, false);
  const std::size_t per = 40 * 40;
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<float> one(batch.values().begin() + static_cast<std::ptrdiff_t>(i * per),
                           batch.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    const auto y = model.forward(nn::Tensor<float>({1, 1, 40, 40}, one), false);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(y.values()[k] - all.values()[i * 4 + k]) <= 1e-6);
    }
  }
}

TEST_CASE("seeded construction is reproducible") {
  const models::Res8<float> a(models::Res8Config{3, 8}, 42), b(models::Res8Config{3, 8}, 42);
  const models::Res8<float> c(models::Res8Config{3, 8}, 43);
  CHECK(a.parameters()[0].tensor.values() == b.parameters()[0].tensor.values());
  CHECK_FALSE(a.parameters()[0].tensor.values() == c.parameters()[0].tensor.values());
}

TEST_CASE("float to double copy keeps the forward") {
  models::Res8<float> f(models::Res8Config{3, 6}, 8);
  models::Res8<double> d(models::Res8Config{3, 6});
  d.copy_from(f);
  const auto xf = random_input(1, 40, 40, 4);
  const nn::Tensor<double> xd(xf.shape(), std::vector<double>(xf.values().begin(), xf.values().end()));
  const auto yf = f.forward(xf, false);
  const auto yd = d.forward(xd, false);
  for (std::size_t k = 0; k < 3; ++k) CHECK(yf.values()[k] == doctest::Approx(yd.values()[k]).epsilon(1e-5));
  models::Res8<double> wrong(models::Res8Config{4, 6});
  CHECK_THROWS_AS(wrong.copy_from(f), ww::DimensionError);
}

TEST_CASE("bundle export then import reproduces the logits") {
  testutil::TempDir d;
  models::Res8<float> model(models::Res8Config{}, 11);
  model.forward(random_input(4, 101, 40, 20), true);
  const auto b = bundle_for(model);
  models::export_bundle(b, d / "b");
  const auto back = models::import_bundle(d / "b");
  CHECK(back.parameter_count() == 110892);
  CHECK(back.stats.mean == -4.5);
  CHECK(back.labels == b.labels);
  CHECK(back.task == "commands");
  CHECK(back.inference == b.inference);
  CHECK(back.frontend == b.frontend);
  auto restored = models::instantiate(back);
  const auto x = random_input(2, 101, 40, 21);
  const auto y0 = model.forward(x, false);
  const auto y1 = restored.forward(x, false);
  for (std::size_t i = 0; i < y0.numel(); ++i) CHECK(std::abs(y0.values()[i] - y1.values()[i]) <= 1e-6);

  const json manifest = json::parse(testutil::read_text(d / "b" / "manifest.json"));
  std::size_t params = 0, total = 0;
  for (const auto& e : manifest.at("params")) {
    std::size_t n = 1;
    for (auto s : e.at("shape")) n *= s.get<std::size_t>();
    CHECK(e.at("len").get<std::size_t>() == n);
    CHECK(e.at("offset").get<std::size_t>() == total);
    total += n;
    if (e.at("kind") == "parameter") params += n;
  }
  CHECK(params == 110892);
  CHECK(manifest.at("param_count") == 110892);
  CHECK(manifest.at("total_floats") == total);
  CHECK(std::filesystem::file_size(d / "b" / "params.bin") == total * 4);
}

TEST_CASE("params.bin is little-endian float32 in table order") {
  testutil::TempDir d;
  const models::Res8<float> model(models::Res8Config{2, 4}, 2);
  models::export_bundle(bundle_for(model), d / "b");
  const auto blob = testutil::read_text(d / "b" / "params.bin");
  const auto& first = model.parameters().front().tensor.values();
  for (std::size_t i = 0; i < first.size(); ++i) {
    uint32_t u = 0;
    for (int k = 0; k < 4; ++k) u |= static_cast<uint32_t>(static_cast<unsigned char>(blob[i * 4 + k])) << (8 * k);
    float f;
    std::memcpy(&f, &u, 4);
    CHECK(f == first[i]);
  }
}

TEST_CASE("corrupted bundles are rejected") {
  testutil::TempDir d;
  const models::Res8<float> model(models::Res8Config{3, 4}, 1);
  models::export_bundle(bundle_for(model), d / "b");
  const auto blob = testutil::read_text(d / "b" / "params.bin");
  const auto manifest = testutil::read_text(d / "b" / "manifest.json");

  SUBCASE("truncated blob") {
    testutil::write_text(d / "b" / "params.bin", blob.substr(0, blob.size() - 10));
    CHECK_THROWS_AS(models::import_bundle(d / "b"), ww::ChecksumError);
  }
  SUBCASE("flipped byte") {
    auto bad = blob;
    bad[17] = static_cast<char>(bad[17] ^ 0x40);
    testutil::write_text(d / "b" / "params.bin", bad);
    CHECK_THROWS_AS(models::import_bundle(d / "b"), ww::ChecksumError);
  }
  SUBCASE("future format version") {
    auto j = json::parse(manifest);
    j["format_version"] = 2;
    testutil::write_text(d / "b" / "manifest.json", j.dump());
    CHECK_THROWS_AS(models::import_bundle(d / "b"), ww::VersionError);
  }
  SUBCASE("unknown architecture") {
    auto j = json::parse(manifest);
    j["arch"] = "res26";
    testutil::write_text(d / "b" / "manifest.json", j.dump());
    CHECK_THROWS_AS(models::import_bundle(d / "b"), ww::UnsupportedError);
  }
  SUBCASE("broken manifest") {
    testutil::write_text(d / "b" / "manifest.json", "{");
    CHECK_THROWS_AS(models::import_bundle(d / "b"), ww::FormatError);
  }
  CHECK_THROWS_AS(models::import_bundle(d / "missing"), ww::IoError);
}

TEST_CASE("re-import is idempotent") {
  testutil::TempDir d;
  const models::Res8<float> model(models::Res8Config{3, 6}, 4);
  models::export_bundle(bundle_for(model), d / "a");
  models::export_bundle(models::import_bundle(d / "a"), d / "b");
  CHECK(testutil::read_text(d / "a" / "params.bin") == testutil::read_text(d / "b" / "params.bin"));
  CHECK(testutil::read_text(d / "a" / "manifest.json") == testutil::read_text(d / "b" / "manifest.json"));
}

TEST_CASE("crc32 reference value") {
  const std::string s = "123456789";
  CHECK(models::crc32({reinterpret_cast<const unsigned char*>(s.data()), s.size()}) == 0xCBF43926u);
}
