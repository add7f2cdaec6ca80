#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace e2bows {

// Dense row-major tensor of doubles. This is deliberately minimal: explicit
// shapes, no broadcasting, no views. Layers that need structured access
// (images, feature maps) index it with small helpers instead of strides.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in);

  static Tensor zeros(std::vector<std::size_t> shape_in);
  static Tensor vector(std::vector<double> values);

  std::size_t size() const { return data.size(); }
  bool is_vector() const { return shape.size() == 1; }

  double operator[](std::size_t i) const { return data[i]; }
  double& operator[](std::size_t i) { return data[i]; }

  bool all_finite() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// Inner product of two 1-D tensors of equal length.
double dot(const Tensor& u, const Tensor& v);

double l2_norm(const Tensor& v);

// v / ||v||2; the all-zero vector is returned unchanged.
Tensor l2_normalize(const Tensor& v);

// Gradient of a scalar loss through l2_normalize: given the forward input and
// the gradient on the normalized output, returns the gradient on the input.
// At the zero vector the map is constant, so the gradient is zero.
Tensor l2_normalize_backward(const Tensor& input, const Tensor& grad_output);

// Row-major offset for (row, col, channel) indexing used by images and
// feature maps throughout the library.
inline std::size_t hwc_index(std::size_t row, std::size_t col, std::size_t channel,
                             std::size_t width, std::size_t channels) {
  return (row * width + col) * channels + channel;
}

}  // namespace e2bows
