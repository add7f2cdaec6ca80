#include "e2bows/tensor.hpp"

#include <cmath>
#include <utility>

#include "e2bows/errors.hpp"

namespace e2bows {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape_product(shape) != data.size()) {
    throw DimensionError("tensor data length does not match shape product");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape_in) {
  Tensor t;
  t.shape = std::move(shape_in);
  t.data.assign(shape_product(t.shape), 0.0);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape = {values.size()};
  t.data = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double dot(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size()) {
    throw DimensionError("dot: length mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += u.data[i] * v.data[i];
  return sum;
}

double l2_norm(const Tensor& v) {
  double sq = 0.0;
  for (double x : v.data) sq += x * x;
  return std::sqrt(sq);
}

Tensor l2_normalize(const Tensor& v) {
  const double norm = l2_norm(v);
  if (norm == 0.0) return v;
  Tensor out = v;
  for (double& x : out.data) x /= norm;
  return out;
}

Tensor l2_normalize_backward(const Tensor& input, const Tensor& grad_output) {
  if (input.size() != grad_output.size()) {
    throw DimensionError("l2_normalize_backward: length mismatch");
  }
  const double norm = l2_norm(input);
  if (norm == 0.0) return Tensor::zeros(input.shape);
  // d(v/||v||)/dv applied to g: (g - (g.y) y) / ||v||  with y = v/||v||.
  double g_dot_y = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    g_dot_y += grad_output.data[i] * input.data[i] / norm;
  }
  Tensor out = Tensor::zeros(input.shape);
  for (std::size_t i = 0; i < input.size(); ++i) {
    out.data[i] = (grad_output.data[i] - g_dot_y * input.data[i] / norm) / norm;
  }
  return out;
}

}  // namespace e2bows
