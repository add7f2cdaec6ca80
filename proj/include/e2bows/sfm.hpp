#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e2bows/backbone.hpp"
#include "e2bows/tensor.hpp"

namespace e2bows {

// Category-classification layer: one weight column per category.
struct ClassifierWeights {
  std::size_t channels = 0;    // C
  std::size_t categories = 0;  // n
  std::vector<double> weights;  // channels x categories, weights[ch * n + cat]
  std::vector<double> biases;   // categories

  static ClassifierWeights init(std::size_t channels, std::size_t categories,
                                std::uint64_t seed);
  double weight(std::size_t channel, std::size_t category) const {
    return weights[channel * categories + category];
  }
};

// The classifier reshaped as n kernels of size 1x1xC. Values are shared with
// the source layer; only the layout differs.
struct ConvKernels {
  std::size_t categories = 0;
  std::size_t channels = 0;
  std::vector<double> kernels;  // categories x channels, kernels[cat * C + ch]
  std::vector<double> biases;
};

// Per-category semantic feature maps plus their spatial means.
struct SfmStack {
  std::size_t categories = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> maps;  // categories x (height*width)
  std::vector<double> avg;   // categories

  double map_at(std::size_t category, std::size_t row, std::size_t col) const {
    return maps[category * height * width + row * width + col];
  }
};

// Pure reshape between the FC layout and 1x1 convolution kernels.
ConvKernels fc_to_conv(const ClassifierWeights& fc);
ClassifierWeights conv_to_fc(const ConvKernels& kernels);

// map_c(x, y) = sum_ch f(x, y, ch) * kernel_c[ch] + bias_c.
SfmStack compute_sfms(const FeatureMaps& features, const ConvKernels& kernels);

// Average-pooled activation of each map, i.e. the category scores.
std::vector<double> classification_scores(const SfmStack& stack);

// Maps with negative average activation are dropped from word generation;
// a zero average keeps the map active.
std::vector<std::uint8_t> active_sfm_mask(const SfmStack& stack);

struct SfmBackwardResult {
  std::vector<double> grad_weights;  // ClassifierWeights layout
  std::vector<double> grad_biases;
  FeatureMaps grad_features;
};

// Gradients of a scalar loss through compute_sfms, given the loss gradient on
// every map value. Classifier gradients come back in FC layout since the
// reshape is value-preserving.
SfmBackwardResult compute_sfms_backward(const FeatureMaps& features,
                                        const ConvKernels& kernels,
                                        const std::vector<double>& grad_maps);

// Writes one 8-bit binary PGM per map (min/max scaled) into dir as
// sfm_000.pgm, sfm_001.pgm, ...
void write_sfm_pgms(const SfmStack& stack, const std::string& dir);

}  // namespace e2bows
