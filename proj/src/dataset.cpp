#include "e2bows/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string_view>
#include <unordered_set>

#include "binary_io.hpp"
#include "e2bows/errors.hpp"

namespace e2bows {

void Dataset::validate() const {
  std::unordered_set<std::uint64_t> ids;
  ids.reserve(images.size());
  for (const DatasetImage& img : images) {
    if (!ids.insert(img.id).second) {
      throw ArgumentError("dataset: duplicate image id " + std::to_string(img.id));
    }
    if (img.labels.empty()) {
      throw ArgumentError("dataset: image " + std::to_string(img.id) +
                          " has no labels");
    }
    for (std::uint32_t label : img.labels) {
      if (label >= class_count) {
        throw ArgumentError("dataset: label " + std::to_string(label) +
                            " out of range for " + std::to_string(class_count) +
                            " classes");
      }
    }
    if (img.pixels.size() != height * width * channels) {
      throw DimensionError("dataset: image " + std::to_string(img.id) +
                           " has wrong pixel count");
    }
  }
}

const DatasetImage& Dataset::by_id(std::uint64_t id) const {
  for (const DatasetImage& img : images) {
    if (img.id == id) return img;
  }
  throw ArgumentError("dataset: no image with id " + std::to_string(id));
}

void SyntheticConfig::validate() const {
  if (class_count < 2) throw ArgumentError("synthetic: need at least 2 classes");
  if (images_per_class == 0) {
    throw ArgumentError("synthetic: images_per_class must be positive");
  }
  if (image_size < 4) throw ArgumentError("synthetic: image size must be >= 4");
  if (noise_sigma < 0.0) throw ArgumentError("synthetic: sigma must be >= 0");
}

namespace {

constexpr double kBackground = 0.05;

const double kPalette[8][3] = {
    {1.0, 0.1, 0.1}, {0.1, 1.0, 0.1}, {0.1, 0.1, 1.0}, {1.0, 1.0, 0.1},
    {1.0, 0.1, 1.0}, {0.1, 1.0, 1.0}, {0.9, 0.9, 0.9}, {1.0, 0.6, 0.1},
};

}  // namespace

Tensor synthetic_template(const SyntheticConfig& cfg, std::uint32_t category) {
  cfg.validate();
  if (category >= cfg.class_count) {
    throw ArgumentError("synthetic: category out of range");
  }
  const std::size_t s = cfg.image_size;
  Tensor img = Tensor::zeros({s, s, 3});

  // Blob centers march around a ring; combined with the color cycle this
  // keeps every (position, color) pair distinct.
  const double angle =
      2.0 * 3.141592653589793 * category / static_cast<double>(cfg.class_count);
  const double cx = 0.5 * s + 0.3 * s * std::cos(angle);
  const double cy = 0.5 * s + 0.3 * s * std::sin(angle);
  const double radius = s / 6.0;
  const double* color = kPalette[category % 8];

  for (std::size_t row = 0; row < s; ++row) {
    for (std::size_t col = 0; col < s; ++col) {
      const double dx = static_cast<double>(col) - cx;
      const double dy = static_cast<double>(row) - cy;
      const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = kBackground + (color[ch] - kBackground) * g;
        img.data[hwc_index(row, col, ch, s, 3)] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

Dataset gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.height = cfg.image_size;
  ds.width = cfg.image_size;
  ds.channels = 3;
  ds.class_count = cfg.class_count;
  ds.images.reserve(static_cast<std::size_t>(cfg.class_count) * cfg.images_per_class);

  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::uint32_t cat = 0; cat < cfg.class_count; ++cat) {
    const Tensor base = synthetic_template(cfg, cat);
    for (std::uint32_t i = 0; i < cfg.images_per_class; ++i) {
      DatasetImage img;
      img.id = static_cast<std::uint64_t>(cat) * cfg.images_per_class + i;
      img.labels = {cat};
      img.pixels = base;
      if (cfg.noise_sigma > 0.0) {
        for (double& v : img.pixels.data) {
          v = std::clamp(v + cfg.noise_sigma * noise(rng), 0.0, 1.0);
        }
      }
      ds.images.push_back(std::move(img));
    }
  }
  return ds;
}

Dataset read_cifar(const std::string& path, CifarVariant variant) {
  const std::size_t record_size = variant == CifarVariant::kCifar10 ? 3073 : 3074;
  const std::size_t label_bytes = variant == CifarVariant::kCifar10 ? 1 : 2;
  const std::uint32_t class_count = variant == CifarVariant::kCifar10 ? 10 : 100;

  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open for reading: " + path);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  if (file_size % record_size != 0) {
    throw FormatError(path + ": size " + std::to_string(file_size) +
                      " is not a multiple of the record size " +
                      std::to_string(record_size));
  }
  in.seekg(0);

  Dataset ds;
  ds.height = 32;
  ds.width = 32;
  ds.channels = 3;
  ds.class_count = class_count;
  const std::uint64_t count = file_size / record_size;
  ds.images.reserve(count);

  std::vector<unsigned char> record(record_size);
  for (std::uint64_t r = 0; r < count; ++r) {
    if (!in.read(reinterpret_cast<char*>(record.data()),
                 static_cast<std::streamsize>(record_size))) {
      throw IoError(path + ": read failed at record " + std::to_string(r));
    }
    // cifar100 records carry (coarse, fine); the fine label is the category.
    const unsigned char label = record[label_bytes - 1];
    if (label >= class_count) {
      throw FormatError(path + ": record " + std::to_string(r) + " has label " +
                        std::to_string(label) + " >= " + std::to_string(class_count));
    }
    DatasetImage img;
    img.id = r;
    img.labels = {label};
    img.pixels = Tensor::zeros({32, 32, 3});
    for (std::size_t plane = 0; plane < 3; ++plane) {
      const unsigned char* bytes = record.data() + label_bytes + plane * 1024;
      for (std::size_t row = 0; row < 32; ++row) {
        for (std::size_t col = 0; col < 32; ++col) {
          img.pixels.data[hwc_index(row, col, plane, 32, 3)] =
              bytes[row * 32 + col] / 255.0;
        }
      }
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  detail::BinaryWriter out(path);
  out.magic("E2DS");
  out.u32(1);
  out.u32(dataset.class_count);
  out.u32(static_cast<std::uint32_t>(dataset.height));
  out.u32(static_cast<std::uint32_t>(dataset.width));
  out.u32(static_cast<std::uint32_t>(dataset.channels));
  out.u64(dataset.images.size());
  for (const DatasetImage& img : dataset.images) {
    out.u64(img.id);
    out.u32(static_cast<std::uint32_t>(img.labels.size()));
    for (std::uint32_t label : img.labels) out.u32(label);
    for (double v : img.pixels.data) out.f32(static_cast<float>(v));
  }
  out.close();
}

Dataset read_dataset(const std::string& path) {
  detail::BinaryReader in(path);
  in.expect_magic("E2DS");
  const std::uint32_t version = in.u32();
  if (version != 1) in.fail("unsupported version " + std::to_string(version));

  Dataset ds;
  ds.class_count = in.u32();
  ds.height = in.u32();
  ds.width = in.u32();
  ds.channels = in.u32();
  const std::uint64_t count = in.u64();
  const std::size_t pixel_count = ds.height * ds.width * ds.channels;
  if (count > 0 && pixel_count == 0) in.fail("records with empty image shape");

  ds.images.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    DatasetImage img;
    img.id = in.u64();
    const std::uint32_t label_count = in.u32();
    if (label_count == 0) in.fail("image without labels");
    img.labels.reserve(label_count);
    for (std::uint32_t i = 0; i < label_count; ++i) img.labels.push_back(in.u32());
    img.pixels = Tensor::zeros({ds.height, ds.width, ds.channels});
    for (std::size_t i = 0; i < pixel_count; ++i) img.pixels.data[i] = in.f32();
    ds.images.push_back(std::move(img));
  }
  in.expect_eof();
  try {
    ds.validate();
  } catch (const Error& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ds;
}

Dataset open_dataset(const std::string& path, DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kNative:
      return read_dataset(path);
    case DatasetFormat::kCifar10:
      return read_cifar(path, CifarVariant::kCifar10);
    case DatasetFormat::kCifar100:
      return read_cifar(path, CifarVariant::kCifar100);
    case DatasetFormat::kAuto:
      break;
  }

  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open for reading: " + path);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string_view(magic, 4) == "E2DS") {
    return read_dataset(path);
  }
  if (size % 3073 == 0) return read_cifar(path, CifarVariant::kCifar10);
  if (size % 3074 == 0) return read_cifar(path, CifarVariant::kCifar100);
  throw FormatError(path + ": neither an E2DS file nor a CIFAR batch " +
                    "(size " + std::to_string(size) + ")");
}

}  // namespace e2bows
