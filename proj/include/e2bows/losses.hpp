#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "e2bows/tensor.hpp"

namespace e2bows {

struct LossWeights {
  double lambda1 = 1.0;  // triplet weight
  double lambda2 = 1.0;  // sparsity weight
  double alpha = 0.2;    // base triplet margin
  double rho_hat = 0.08; // target fraction of nonzero words

  void validate() const;  // throws ArgumentError
};

// loss = -log softmax(scores)[label], grad = softmax(scores) - onehot(label).
// Stable under large scores (max subtraction).
std::pair<double, Tensor> softmax_cross_entropy(const Tensor& scores,
                                                std::size_t label);

struct TripletResult {
  double loss = 0.0;
  Tensor grad_va;
  Tensor grad_vp;
  Tensor grad_vn;
};

// Hinge on cosine similarities of already-normalized vectors:
// loss = max(0, dot(va,vn) - dot(va,vp) + alpha). When the hinge is active
// the gradients are the closed forms vn-vp, -va, va; otherwise all zero.
TripletResult triplet_cosine_loss(const Tensor& va, const Tensor& vp,
                                  const Tensor& vn, double alpha);

struct SparsityResult {
  double loss = 0.0;
  double dloss_dbeta = 0.0;
  double rho_clamped = 0.0;
};

// KLD between the target ratio rho_hat and the measured ratio rho, with the
// surrogate gradient (rho_hat - rho) / (1 - rho) for the threshold beta.
// rho is clamped to [1e-6, 1-1e-6] before the logs.
SparsityResult sparsity_loss_and_grad(double rho_hat, double rho);

// The two factors of the chain route: d(loss)/d(rho) and the surrogate
// d(rho)/d(beta) = -rho. Their product must match the closed form returned
// by sparsity_loss_and_grad; the implementation checks this internally.
double sparsity_dloss_drho(double rho_hat, double rho);
double sparsity_drho_dbeta(double rho);

double combined_loss(double l_cls, double l_tri, double l_spa,
                     const LossWeights& w);

// Rooted category hierarchy for margin adaptation. Immutable after
// construction; similarity S(c1,c2) = depth(lowest common ancestor) / H
// where H is the maximum leaf depth and the root has depth 0.
class CategoryTree {
 public:
  // nodes: (node_id, parent_id) with exactly one parent_id == -1 (the root).
  // categories: (category_id, leaf node_id).
  static CategoryTree build(
      const std::vector<std::pair<std::int64_t, std::int64_t>>& nodes,
      const std::vector<std::pair<std::uint32_t, std::int64_t>>& categories);

  // Text file: a node section ("node_id parent_id" per line), a blank line,
  // then a category section ("category_id node_id" per line).
  static CategoryTree load(const std::string& path);

  double similarity(std::uint32_t c1, std::uint32_t c2) const;
  bool has_category(std::uint32_t c) const;
  std::size_t height() const { return height_; }
  std::size_t node_count() const { return depth_.size(); }
  std::size_t category_count() const { return category_leaf_.size(); }

 private:
  std::unordered_map<std::int64_t, std::int64_t> parent_;
  std::unordered_map<std::int64_t, std::size_t> depth_;
  std::unordered_map<std::uint32_t, std::int64_t> category_leaf_;
  std::size_t height_ = 0;
};

double category_similarity(const CategoryTree& tree, std::uint32_t c1,
                           std::uint32_t c2);

// alpha / (1 + S)^2: similar categories (deep common ancestor) get a smaller
// required margin.
double adaptive_margin(double alpha, double similarity);

}  // namespace e2bows
