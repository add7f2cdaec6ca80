#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "e2bows/sfm.hpp"
#include "e2bows/tensor.hpp"

namespace e2bows {

// Per-SFM local fully connected banks plus the learned sparsity threshold.
// Parameter count is map_size * words_per_sfm * categories.
struct BowlParams {
  std::size_t categories = 0;     // n
  std::size_t map_size = 0;       // h*w
  std::size_t words_per_sfm = 0;  // m
  std::vector<double> weights;    // categories x map_size x words_per_sfm
  std::vector<double> biases;     // categories x words_per_sfm
  double beta = 0.0;

  static BowlParams init(std::size_t categories, std::size_t map_size,
                         std::size_t words_per_sfm, std::uint64_t seed);
  std::size_t dim() const { return categories * words_per_sfm; }
  double weight(std::size_t category, std::size_t cell, std::size_t word) const {
    return weights[(category * map_size + cell) * words_per_sfm + word];
  }
};

struct WordEntry {
  std::uint32_t word_id = 0;
  double value = 0.0;
};

// Sparse non-negative visual-word vector. Entries are sorted by word id and
// strictly positive; zeros are never stored.
struct VisualWordVector {
  std::uint32_t dim = 0;
  std::vector<WordEntry> entries;
  bool binary = false;
};

struct BowlForwardCache {
  std::vector<double> maps;           // input SFM values
  std::vector<std::uint8_t> mask;
  Tensor pre_activations;             // before ReLU, masked banks included as 0
};

// raw[c*m + j] = ReLU(sum_cell map_c(cell) * W_c[cell][j] + b_c[j]) for active
// SFMs; all words of a masked-off SFM are exactly zero.
std::pair<Tensor, BowlForwardCache> bowl_forward(
    const SfmStack& stack, const std::vector<std::uint8_t>& mask,
    const BowlParams& params);

struct BowlGrads {
  std::vector<double> grad_weights;
  std::vector<double> grad_biases;
  std::vector<double> grad_maps;  // categories x map_size
};

BowlGrads bowl_backward(const BowlParams& params, const BowlForwardCache& cache,
                        const Tensor& grad_raw);

// L2-normalize the raw words, then keep only coordinates strictly above beta.
// Kept values are not renormalized.
VisualWordVector words_postprocess(const Tensor& raw, double beta);

// Replaces every stored value with 1 (the sign of a positive value).
VisualWordVector binarize(const VisualWordVector& v);

// Fraction of entries strictly above beta across a batch of dense,
// L2-normalized word tensors.
double sparsity_ratio(const std::vector<Tensor>& batch, double beta);

// Dense view of a sparse vector (test and oracle plumbing).
Tensor to_dense(const VisualWordVector& v);

// Sparse words file: one line per image, "image_id K id:val id:val ...",
// values with 9 significant digits. Binarized vectors print values as "1";
// a file whose every value reads back as exactly 1 is loaded as binary.
void write_words_file(
    const std::string& path,
    const std::vector<std::pair<std::uint64_t, VisualWordVector>>& records);
struct WordsFile {
  std::uint32_t max_word_id_plus_one = 0;  // lower bound on the vector dim
  std::vector<std::pair<std::uint64_t, VisualWordVector>> records;
};
// The line format carries no dimensionality; loaded vectors get their dim
// from the largest id seen and callers widen it (e.g. from --dim).
WordsFile read_words_file(const std::string& path);

// Sets the dim of every record, failing if an entry id would fall outside.
void set_words_dim(WordsFile& words, std::uint32_t dim);

}  // namespace e2bows
