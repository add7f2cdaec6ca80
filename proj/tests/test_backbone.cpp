#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "e2bows/backbone.hpp"
#include "e2bows/errors.hpp"
#include "e2bows/gradcheck.hpp"

using namespace e2bows;

namespace {

Tensor random_image(std::size_t h, std::size_t w, std::size_t c,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor img = Tensor::zeros({h, w, c});
  for (auto& v : img.data) v = u(rng);
  return img;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("output shape follows the block arithmetic") {
  BackboneConfig cfg;  // 32x32x3, blocks (3,16)(3,32)(3,64)
  CHECK(cfg.output_height() == 4);
  CHECK(cfg.output_width() == 4);
  CHECK(cfg.output_channels() == 64);

  const BackboneParams params = BackboneParams::init(cfg);
  const auto [features, cache] = backbone_forward(random_image(32, 32, 3, 1), params);
  CHECK(features.height == 4);
  CHECK(features.width == 4);
  CHECK(features.channels == 64);
  CHECK(cache.layer_inputs.size() == 3);
}

TEST_CASE("zero image with zero biases yields zero features") {
  BackboneConfig cfg;
  BackboneParams params = BackboneParams::init(cfg);
  for (auto& layer : params.layers) {
    for (auto& b : layer.bias.data) b = 0.0;
  }
  const auto [features, cache] = backbone_forward(Tensor::zeros({32, 32, 3}), params);
  for (double v : features.values) CHECK(v == 0.0);
}

TEST_CASE("forward is deterministic and non-negative") {
  BackboneConfig cfg;
  cfg.rng_seed = 5;
  const BackboneParams params = BackboneParams::init(cfg);
  const Tensor img = random_image(32, 32, 3, 2);
  const auto [f1, c1] = backbone_forward(img, params);
  const auto [f2, c2] = backbone_forward(img, params);
  CHECK(f1.values == f2.values);
  for (double v : f1.values) CHECK(v >= 0.0);
}

TEST_CASE("forward rejects a mismatched image shape") {
  const BackboneParams params = BackboneParams::init(BackboneConfig{});
  CHECK_THROWS_AS(backbone_forward(Tensor::zeros({16, 16, 3}), params),
                  DimensionError);
  CHECK_THROWS_AS(backbone_forward(Tensor::zeros({32, 32, 1}), params),
                  DimensionError);
}

TEST_CASE("backward zero gradient and linearity") {
  BackboneConfig cfg;
  cfg.input_height = 8;
  cfg.input_width = 8;
  cfg.input_channels = 2;
  cfg.blocks = {{3, 4}, {3, 6}};
  cfg.rng_seed = 3;
  const BackboneParams params = BackboneParams::init(cfg);
  const Tensor img = random_image(8, 8, 2, 4);
  const auto [features, cache] = backbone_forward(img, params);

  const Tensor zeros = Tensor::zeros({features.height, features.width,
                                      features.channels});
  const BackboneGrads g0 = backbone_backward(params, cache, zeros);
  for (const auto& layer : g0.layers) {
    for (double v : layer.weights.data) CHECK(v == 0.0);
    for (double v : layer.bias.data) CHECK(v == 0.0);
  }
  for (double v : g0.grad_image.data) CHECK(v == 0.0);

  Tensor g = zeros;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : g.data) v = u(rng);
  Tensor g2 = g;
  for (auto& v : g2.data) v *= 2.0;

  const BackboneGrads a = backbone_backward(params, cache, g);
  const BackboneGrads b = backbone_backward(params, cache, g2);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t i = 0; i < a.layers[l].weights.size(); ++i) {
      CHECK(b.layers[l].weights.data[i] ==
            doctest::Approx(2.0 * a.layers[l].weights.data[i]).epsilon(1e-12));
    }
  }
}

// Scalar probe: project the feature maps onto a fixed random direction and
// compare analytic parameter/input gradients against central differences.
TEST_CASE("backward matches finite differences") {
  BackboneConfig cfg;
  cfg.input_height = 6;
  cfg.input_width = 6;
  cfg.input_channels = 2;
  cfg.blocks = {{3, 3}};
  cfg.rng_seed = 11;
  const BackboneParams params = BackboneParams::init(cfg);
  const Tensor img = random_image(6, 6, 2, 12);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor probe = Tensor::zeros({3, 3, 3});
  for (auto& v : probe.data) v = u(rng);

  const auto loss_at = [&](const BackboneParams& p, const Tensor& image) {
    const auto [f, c] = backbone_forward(image, p);
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) s += f.values[i] * probe.data[i];
    return s;
  };

  const auto [features, cache] = backbone_forward(img, params);
  const BackboneGrads grads = backbone_backward(params, cache, probe);

  SUBCASE("kernel weights") {
    const auto f = [&](const Tensor& w) {
      BackboneParams p = params;
      p.layers[0].weights = w;
      return loss_at(p, img);
    };
    const GradCheckReport r =
        finite_diff_check(f, params.layers[0].weights, grads.layers[0].weights, 1e-4);
    CHECK(r.max_rel_error < 1e-3);
  }
  SUBCASE("biases") {
    const auto f = [&](const Tensor& b) {
      BackboneParams p = params;
      p.layers[0].bias = b;
      return loss_at(p, img);
    };
    const GradCheckReport r =
        finite_diff_check(f, params.layers[0].bias, grads.layers[0].bias, 1e-4);
    CHECK(r.max_rel_error < 1e-3);
  }
  SUBCASE("input image") {
    const auto f = [&](const Tensor& x) { return loss_at(params, x); };
    const GradCheckReport r = finite_diff_check(f, img, grads.grad_image, 1e-4);
    CHECK(r.max_rel_error < 1e-3);
  }
}

TEST_CASE("feature file round-trip") {
  const auto path = temp_file("e2bows_test_features.e2fm");

  SUBCASE("empty") {
    write_feature_file(path.string(), {});
    CHECK(read_feature_file(path.string()).empty());
  }

  SUBCASE("two records") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<std::pair<std::uint64_t, FeatureMaps>> records;
    for (std::uint64_t id : {7ull, 9ull}) {
      FeatureMaps f;
      f.height = 4;
      f.width = 4;
      f.channels = 64;
      f.values.resize(4 * 4 * 64);
      for (auto& v : f.values) v = u(rng);
      records.emplace_back(id, std::move(f));
    }
    write_feature_file(path.string(), records);

    const auto loaded = read_feature_file(path.string());
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].first == 7);
    CHECK(loaded[1].first == 9);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(loaded[r].second.height == 4);
      CHECK(loaded[r].second.channels == 64);
      for (std::size_t i = 0; i < records[r].second.values.size(); ++i) {
        // Values survive exactly at float32 storage precision.
        CHECK(loaded[r].second.values[i] ==
              static_cast<double>(static_cast<float>(records[r].second.values[i])));
      }
    }
  }

  SUBCASE("truncation and bad magic are format errors") {
    FeatureMaps f;
    f.height = 2;
    f.width = 2;
    f.channels = 1;
    f.values = {1.0, 2.0, 3.0, 4.0};
    write_feature_file(path.string(), {{1, f}});

    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 1);
    CHECK_THROWS_AS(read_feature_file(path.string()), FormatError);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOPE";
    out.close();
    CHECK_THROWS_AS(read_feature_file(path.string()), FormatError);
  }

  std::filesystem::remove(path);
}
