#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e2bows/tensor.hpp"

namespace e2bows {

struct DatasetImage {
  std::uint64_t id = 0;
  std::vector<std::uint32_t> labels;  // at least one, each < class_count
  Tensor pixels;                      // height x width x channels, values in [0,1]
};

struct Dataset {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::uint32_t class_count = 0;
  std::vector<DatasetImage> images;

  void validate() const;  // throws on label range or id uniqueness violations
  const DatasetImage& by_id(std::uint64_t id) const;  // ArgumentError if absent
};

struct SyntheticConfig {
  std::uint32_t class_count = 10;
  std::uint32_t images_per_class = 60;
  std::size_t image_size = 16;  // square RGB images
  double noise_sigma = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Noise-free class pattern: a Gaussian intensity blob at a class-specific
// position in a class-specific color over a dark background.
Tensor synthetic_template(const SyntheticConfig& cfg, std::uint32_t category);

// Template plus i.i.d. Gaussian pixel noise, clamped to [0,1]. Image ids are
// category * images_per_class + instance.
Dataset gen_synthetic(const SyntheticConfig& cfg);

enum class CifarVariant { kCifar10, kCifar100 };

// CIFAR binary batches: per record one label byte (cifar10) or coarse+fine
// label bytes (cifar100; the fine label is kept), then 3072 channel-planar
// pixel bytes mapped to [0,1] by /255.
Dataset read_cifar(const std::string& path, CifarVariant variant);

// Dataset container ("E2DS"): little-endian binary with f32 pixels.
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

enum class DatasetFormat { kAuto, kNative, kCifar10, kCifar100 };

// kAuto sniffs the E2DS magic first, then falls back to whichever CIFAR
// record size divides the file length.
Dataset open_dataset(const std::string& path, DatasetFormat format);

}  // namespace e2bows
