#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "e2bows/backbone.hpp"
#include "e2bows/bowl.hpp"
#include "e2bows/dataset.hpp"
#include "e2bows/losses.hpp"
#include "e2bows/sfm.hpp"

namespace e2bows {

struct TrainConfig {
  double lambda1 = 1.0;             // triplet loss weight
  double lambda2 = 1.0;             // sparsity loss weight
  double alpha = 0.2;               // base triplet margin
  double rho_hat = 0.08;            // target nonzero-word ratio
  double learning_rate = 0.01;
  double beta_learning_rate = 0.001;
  std::uint32_t batch_size = 32;
  std::uint32_t epochs = 5;
  std::uint64_t rng_seed = 0;
  std::uint32_t words_per_sfm = 10;  // m
  bool freeze_backbone = false;

  void validate() const;  // throws ArgumentError
};

// The full trainable state. beta lives inside bowl.
struct ModelParams {
  BackboneParams backbone;
  ClassifierWeights classifier;
  BowlParams bowl;

  // Derives classifier/bowl shapes from the backbone output; sub-seeds are
  // offsets of config.rng_seed.
  static ModelParams init(const BackboneConfig& config, std::uint32_t class_count,
                          std::uint32_t words_per_sfm);
  std::size_t dim() const { return bowl.dim(); }
};

// Indices into the current batch; the margin is already adapted to the
// anchor/negative category similarity when a tree is available.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  double margin = 0.0;
};
using TripletBatch = std::vector<Triplet>;

// Anchors are uniform over images whose label appears at least twice (others
// admit no positive); positives uniform over same-label partners; negatives
// uniform over differently labeled images. Returns an empty batch when every
// label is a singleton. Throws if fewer than two distinct labels are present.
TripletBatch sample_triplets(const std::vector<std::uint32_t>& labels,
                             const CategoryTree* tree, double alpha,
                             std::size_t count, std::mt19937_64& rng);

struct LossReport {
  double total = 0.0;
  double classification = 0.0;
  double triplet = 0.0;
  double sparsity = 0.0;
  double rho = 0.0;   // measured on this batch before the beta update
  double beta = 0.0;  // after the update
};

// One SGD step over the batch: weights move against the gradient of the
// classification and triplet terms; beta moves by the sparsity surrogate
// gradient scaled by lambda2 and is clamped at zero.
LossReport train_step(const std::vector<const Tensor*>& images,
                      const std::vector<std::uint32_t>& labels,
                      const TripletBatch& triplets, ModelParams& params,
                      const TrainConfig& cfg);

struct TrainResult {
  ModelParams params;
  std::vector<LossReport> history;  // one entry per step
};

// Shuffled mini-batch SGD for cfg.epochs passes; batches where only one
// label survives the shuffle simply train without triplets. The first label
// of each image is its training category.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg,
                  const CategoryTree* tree = nullptr);

// Forward pass of one image to the raw (pre-normalization) word vector.
Tensor image_raw_words(const ModelParams& params, const Tensor& image);

// Checkpoint ("E2BW"): config, architecture, and every parameter tensor at
// full float64 precision, beta included.
void save_checkpoint(const ModelParams& params, const TrainConfig& cfg,
                     const std::string& path);
std::pair<ModelParams, TrainConfig> load_checkpoint(const std::string& path);

}  // namespace e2bows
