#include "e2bows/bowl.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "e2bows/errors.hpp"

namespace e2bows {

BowlParams BowlParams::init(std::size_t categories, std::size_t map_size,
                            std::size_t words_per_sfm, std::uint64_t seed) {
  if (categories == 0 || map_size == 0 || words_per_sfm == 0) {
    throw ArgumentError("bowl: categories, map_size and words_per_sfm must be positive");
  }
  BowlParams p;
  p.categories = categories;
  p.map_size = map_size;
  p.words_per_sfm = words_per_sfm;
  const double s = std::sqrt(6.0 / static_cast<double>(map_size + words_per_sfm));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-s, s);
  p.weights.resize(categories * map_size * words_per_sfm);
  for (auto& v : p.weights) v = u(rng);
  p.biases.assign(categories * words_per_sfm, 0.0);
  p.beta = 0.0;
  return p;
}

std::pair<Tensor, BowlForwardCache> bowl_forward(
    const SfmStack& stack, const std::vector<std::uint8_t>& mask,
    const BowlParams& params) {
  const std::size_t plane = stack.height * stack.width;
  if (stack.categories != params.categories || plane != params.map_size) {
    throw DimensionError("bowl_forward: stack does not match params");
  }
  if (mask.size() != params.categories) {
    throw DimensionError("bowl_forward: mask size does not match categories");
  }

  const std::size_t m = params.words_per_sfm;
  BowlForwardCache cache;
  cache.maps = stack.maps;
  cache.mask = mask;
  cache.pre_activations = Tensor::zeros({params.dim()});
  Tensor raw = Tensor::zeros({params.dim()});

  for (std::size_t cat = 0; cat < params.categories; ++cat) {
    if (!mask[cat]) continue;
    const double* map = &stack.maps[cat * plane];
    double* pre = &cache.pre_activations.data[cat * m];
    double* out = &raw.data[cat * m];
    for (std::size_t j = 0; j < m; ++j) pre[j] = params.biases[cat * m + j];
    for (std::size_t cell = 0; cell < plane; ++cell) {
      const double v = map[cell];
      if (v == 0.0) continue;
      const double* w = &params.weights[(cat * plane + cell) * m];
      for (std::size_t j = 0; j < m; ++j) pre[j] += v * w[j];
    }
    for (std::size_t j = 0; j < m; ++j) out[j] = pre[j] > 0.0 ? pre[j] : 0.0;
  }
  return {std::move(raw), std::move(cache)};
}

BowlGrads bowl_backward(const BowlParams& params, const BowlForwardCache& cache,
                        const Tensor& grad_raw) {
  if (grad_raw.size() != params.dim()) {
    throw DimensionError("bowl_backward: grad_raw length does not match dim");
  }
  if (cache.maps.size() != params.categories * params.map_size) {
    throw DimensionError("bowl_backward: cache does not match params");
  }

  const std::size_t plane = params.map_size;
  const std::size_t m = params.words_per_sfm;
  BowlGrads grads;
  grads.grad_weights.assign(params.weights.size(), 0.0);
  grads.grad_biases.assign(params.biases.size(), 0.0);
  grads.grad_maps.assign(cache.maps.size(), 0.0);

  for (std::size_t cat = 0; cat < params.categories; ++cat) {
    if (!cache.mask[cat]) continue;  // no forward contribution, no gradient
    const double* pre = &cache.pre_activations.data[cat * m];
    const double* g_out = &grad_raw.data[cat * m];
    double g[64];
    std::vector<double> g_heap;
    double* g_masked;
    if (m <= 64) {
      g_masked = g;
    } else {
      g_heap.resize(m);
      g_masked = g_heap.data();
    }
    for (std::size_t j = 0; j < m; ++j) {
      g_masked[j] = pre[j] > 0.0 ? g_out[j] : 0.0;
      grads.grad_biases[cat * m + j] += g_masked[j];
    }
    const double* map = &cache.maps[cat * plane];
    for (std::size_t cell = 0; cell < plane; ++cell) {
      const double v = map[cell];
      const double* w = &params.weights[(cat * plane + cell) * m];
      double* gw = &grads.grad_weights[(cat * plane + cell) * m];
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        gw[j] += v * g_masked[j];
        acc += w[j] * g_masked[j];
      }
      grads.grad_maps[cat * plane + cell] = acc;
    }
  }
  return grads;
}

VisualWordVector words_postprocess(const Tensor& raw, double beta) {
  const Tensor v = l2_normalize(raw);
  VisualWordVector out;
  out.dim = static_cast<std::uint32_t>(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v.data[j] > beta && v.data[j] > 0.0) {
      out.entries.push_back({static_cast<std::uint32_t>(j), v.data[j]});
    }
  }
  return out;
}

VisualWordVector binarize(const VisualWordVector& v) {
  if (v.binary) throw ArgumentError("binarize: vector is already binary");
  VisualWordVector out;
  out.dim = v.dim;
  out.binary = true;
  out.entries.reserve(v.entries.size());
  for (const auto& e : v.entries) out.entries.push_back({e.word_id, 1.0});
  return out;
}

double sparsity_ratio(const std::vector<Tensor>& batch, double beta) {
  if (batch.empty()) throw ArgumentError("sparsity_ratio: empty batch");
  const std::size_t dim = batch.front().size();
  std::size_t above = 0;
  for (const Tensor& words : batch) {
    if (words.size() != dim) {
      throw DimensionError("sparsity_ratio: word tensors differ in length");
    }
    for (double x : words.data) {
      if (x > beta) ++above;
    }
  }
  return static_cast<double>(above) / (static_cast<double>(batch.size()) * dim);
}

Tensor to_dense(const VisualWordVector& v) {
  Tensor dense = Tensor::zeros({v.dim});
  for (const auto& e : v.entries) dense.data[e.word_id] = e.value;
  return dense;
}

void write_words_file(
    const std::string& path,
    const std::vector<std::pair<std::uint64_t, VisualWordVector>>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[64];
  for (const auto& [id, vec] : records) {
    out << id << ' ' << vec.entries.size();
    for (const auto& e : vec.entries) {
      if (vec.binary) {
        out << ' ' << e.word_id << ":1";
      } else {
        std::snprintf(buf, sizeof buf, "%.9g", e.value);
        out << ' ' << e.word_id << ':' << buf;
      }
    }
    out << '\n';
  }
  out.close();
  if (!out) throw IoError("write failed: " + path);
}

WordsFile read_words_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);

  WordsFile file;
  std::string line;
  std::size_t line_no = 0;
  bool all_ones = true;
  bool any_entry = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::uint64_t image_id = 0;
    std::size_t count = 0;
    if (!(ls >> image_id >> count)) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": bad record header");
    }
    VisualWordVector vec;
    vec.entries.reserve(count);
    std::int64_t prev_id = -1;
    for (std::size_t i = 0; i < count; ++i) {
      std::string token;
      if (!(ls >> token)) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": expected " + std::to_string(count) + " entries, got " +
                          std::to_string(i));
      }
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": malformed entry '" +
                          token + "'");
      }
      std::uint32_t word_id = 0;
      double value = 0.0;
      try {
        word_id = static_cast<std::uint32_t>(std::stoul(token.substr(0, colon)));
        value = std::stod(token.substr(colon + 1));
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": malformed entry '" +
                          token + "'");
      }
      if (static_cast<std::int64_t>(word_id) <= prev_id) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": word ids must be strictly increasing");
      }
      if (!(value > 0.0)) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": values must be strictly positive");
      }
      prev_id = word_id;
      vec.entries.push_back({word_id, value});
      any_entry = true;
      if (value != 1.0) all_ones = false;
      file.max_word_id_plus_one =
          std::max(file.max_word_id_plus_one, word_id + 1);
    }
    std::string rest;
    if (ls >> rest) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": trailing tokens");
    }
    file.records.emplace_back(image_id, std::move(vec));
  }

  const bool binary = any_entry && all_ones;
  for (auto& [id, vec] : file.records) {
    (void)id;
    vec.dim = file.max_word_id_plus_one;
    vec.binary = binary;
  }
  return file;
}

void set_words_dim(WordsFile& words, std::uint32_t dim) {
  if (dim < words.max_word_id_plus_one) {
    throw ArgumentError("set_words_dim: dim " + std::to_string(dim) +
                        " is smaller than a stored word id requires (" +
                        std::to_string(words.max_word_id_plus_one) + ")");
  }
  for (auto& [id, vec] : words.records) {
    (void)id;
    vec.dim = dim;
  }
}

}  // namespace e2bows
