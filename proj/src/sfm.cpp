#include "e2bows/sfm.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "e2bows/errors.hpp"

namespace e2bows {

ClassifierWeights ClassifierWeights::init(std::size_t channels,
                                          std::size_t categories,
                                          std::uint64_t seed) {
  if (categories < 2) throw ArgumentError("classifier: need at least 2 categories");
  if (channels == 0) throw ArgumentError("classifier: channels must be positive");
  ClassifierWeights fc;
  fc.channels = channels;
  fc.categories = categories;
  const double s = std::sqrt(6.0 / static_cast<double>(channels + categories));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-s, s);
  fc.weights.resize(channels * categories);
  for (auto& v : fc.weights) v = u(rng);
  fc.biases.assign(categories, 0.0);
  return fc;
}

ConvKernels fc_to_conv(const ClassifierWeights& fc) {
  ConvKernels k;
  k.categories = fc.categories;
  k.channels = fc.channels;
  k.kernels.resize(fc.categories * fc.channels);
  for (std::size_t ch = 0; ch < fc.channels; ++ch) {
    for (std::size_t cat = 0; cat < fc.categories; ++cat) {
      k.kernels[cat * fc.channels + ch] = fc.weights[ch * fc.categories + cat];
    }
  }
  k.biases = fc.biases;
  return k;
}

ClassifierWeights conv_to_fc(const ConvKernels& kernels) {
  ClassifierWeights fc;
  fc.channels = kernels.channels;
  fc.categories = kernels.categories;
  fc.weights.resize(kernels.channels * kernels.categories);
  for (std::size_t cat = 0; cat < kernels.categories; ++cat) {
    for (std::size_t ch = 0; ch < kernels.channels; ++ch) {
      fc.weights[ch * kernels.categories + cat] =
          kernels.kernels[cat * kernels.channels + ch];
    }
  }
  fc.biases = kernels.biases;
  return fc;
}

SfmStack compute_sfms(const FeatureMaps& features, const ConvKernels& kernels) {
  if (features.channels != kernels.channels) {
    throw DimensionError("compute_sfms: feature channels do not match kernels");
  }
  SfmStack stack;
  stack.categories = kernels.categories;
  stack.height = features.height;
  stack.width = features.width;
  const std::size_t plane = features.height * features.width;
  stack.maps.assign(kernels.categories * plane, 0.0);
  stack.avg.assign(kernels.categories, 0.0);

  for (std::size_t cat = 0; cat < kernels.categories; ++cat) {
    const double* kernel = &kernels.kernels[cat * kernels.channels];
    double* map = &stack.maps[cat * plane];
    double sum = 0.0;
    for (std::size_t px = 0; px < plane; ++px) {
      const double* f = &features.values[px * features.channels];
      double v = kernels.biases[cat];
      for (std::size_t ch = 0; ch < kernels.channels; ++ch) v += f[ch] * kernel[ch];
      map[px] = v;
      sum += v;
    }
    stack.avg[cat] = sum / static_cast<double>(plane);
  }
  return stack;
}

std::vector<double> classification_scores(const SfmStack& stack) {
  return stack.avg;
}

std::vector<std::uint8_t> active_sfm_mask(const SfmStack& stack) {
  std::vector<std::uint8_t> mask(stack.categories);
  for (std::size_t cat = 0; cat < stack.categories; ++cat) {
    mask[cat] = stack.avg[cat] >= 0.0 ? 1 : 0;
  }
  return mask;
}

SfmBackwardResult compute_sfms_backward(const FeatureMaps& features,
                                        const ConvKernels& kernels,
                                        const std::vector<double>& grad_maps) {
  const std::size_t plane = features.height * features.width;
  if (grad_maps.size() != kernels.categories * plane) {
    throw DimensionError("compute_sfms_backward: grad_maps size mismatch");
  }
  if (features.channels != kernels.channels) {
    throw DimensionError("compute_sfms_backward: channel mismatch");
  }

  SfmBackwardResult result;
  result.grad_weights.assign(kernels.channels * kernels.categories, 0.0);
  result.grad_biases.assign(kernels.categories, 0.0);
  result.grad_features.height = features.height;
  result.grad_features.width = features.width;
  result.grad_features.channels = features.channels;
  result.grad_features.values.assign(features.values.size(), 0.0);

  for (std::size_t cat = 0; cat < kernels.categories; ++cat) {
    const double* kernel = &kernels.kernels[cat * kernels.channels];
    const double* g = &grad_maps[cat * plane];
    for (std::size_t px = 0; px < plane; ++px) {
      const double gv = g[px];
      if (gv == 0.0) continue;
      result.grad_biases[cat] += gv;
      const double* f = &features.values[px * features.channels];
      double* gf = &result.grad_features.values[px * features.channels];
      for (std::size_t ch = 0; ch < kernels.channels; ++ch) {
        result.grad_weights[ch * kernels.categories + cat] += gv * f[ch];
        gf[ch] += gv * kernel[ch];
      }
    }
  }
  return result;
}

void write_sfm_pgms(const SfmStack& stack, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t plane = stack.height * stack.width;
  for (std::size_t cat = 0; cat < stack.categories; ++cat) {
    const double* map = &stack.maps[cat * plane];
    const auto [lo_it, hi_it] = std::minmax_element(map, map + plane);
    const double lo = *lo_it, hi = *hi_it;
    const double span = hi > lo ? hi - lo : 1.0;

    char name[32];
    std::snprintf(name, sizeof name, "sfm_%03zu.pgm", cat);
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P5\n" << stack.width << " " << stack.height << "\n255\n";
    for (std::size_t px = 0; px < plane; ++px) {
      const double scaled = (map[px] - lo) / span * 255.0;
      out.put(static_cast<char>(static_cast<unsigned char>(scaled + 0.5)));
    }
    if (!out) throw IoError("write failed: " + path);
  }
}

}  // namespace e2bows
