#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "e2bows/tensor.hpp"

namespace e2bows {

// Non-negative activation block produced by the backbone, stored in
// (row, col, channel) row-major order.
struct FeatureMaps {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col, std::size_t channel) const {
    return values[hwc_index(row, col, channel, width, channels)];
  }
};

struct ConvBlockSpec {
  std::size_t kernel_size = 3;  // odd, same-padded
  std::size_t out_channels = 0;
};

// Architecture of the small trainable feature extractor: a fixed stack of
// (conv k x k same-padding, ReLU, 2x2 max-pool) blocks.
struct BackboneConfig {
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  std::size_t input_channels = 3;
  std::vector<ConvBlockSpec> blocks = {{3, 16}, {3, 32}, {3, 64}};
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws ArgumentError on an impossible stack
  std::size_t output_height() const;
  std::size_t output_width() const;
  std::size_t output_channels() const;
};

struct ConvLayerParams {
  Tensor weights;  // kernel_size x kernel_size x in_channels x out_channels
  Tensor bias;     // out_channels
};

struct BackboneParams {
  BackboneConfig config;
  std::vector<ConvLayerParams> layers;

  // Uniform init in [-s, s] with s = sqrt(6 / (fan_in + fan_out)), seeded
  // from config.rng_seed.
  static BackboneParams init(const BackboneConfig& config);
};

// Everything the backward pass needs, captured during forward.
struct BackboneForwardCache {
  std::vector<Tensor> layer_inputs;     // input to each block (the image first)
  std::vector<Tensor> pre_activations;  // per block, conv output before ReLU
  // Per block, for each pooled cell the flat index of the winning activation.
  std::vector<std::vector<std::size_t>> pool_argmax;
};

std::pair<FeatureMaps, BackboneForwardCache> backbone_forward(
    const Tensor& image, const BackboneParams& params);

struct BackboneGrads {
  std::vector<ConvLayerParams> layers;  // same shapes as the parameters
  Tensor grad_image;
};

// Gradients of a scalar loss with respect to every backbone parameter and the
// input image, given the loss gradient on the output feature maps.
BackboneGrads backbone_backward(const BackboneParams& params,
                                const BackboneForwardCache& cache,
                                const Tensor& grad_output);

// Feature file ("E2FM"): little-endian binary holding equally-shaped feature
// map records keyed by image id.
void write_feature_file(
    const std::string& path,
    const std::vector<std::pair<std::uint64_t, FeatureMaps>>& records);
std::vector<std::pair<std::uint64_t, FeatureMaps>> read_feature_file(
    const std::string& path);

}  // namespace e2bows
