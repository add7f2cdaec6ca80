#include "e2bows/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "e2bows/errors.hpp"

namespace e2bows {

namespace {

constexpr double kRhoFloor = 1e-6;

double clamp_rho(double rho) {
  return std::clamp(rho, kRhoFloor, 1.0 - kRhoFloor);
}

}  // namespace

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ArgumentError("loss weights must be non-negative");
  }
  if (!(alpha > 0.0)) throw ArgumentError("margin alpha must be positive");
  if (!(rho_hat > 0.0) || !(rho_hat < 1.0)) {
    throw ArgumentError("rho_hat must lie in (0, 1)");
  }
}

std::pair<double, Tensor> softmax_cross_entropy(const Tensor& scores,
                                                std::size_t label) {
  const std::size_t n = scores.size();
  if (label >= n) {
    throw ArgumentError("softmax_cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(n) + " scores");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores.data) mx = std::max(mx, s);

  Tensor grad = Tensor::zeros({n});
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grad.data[i] = std::exp(scores.data[i] - mx);
    denom += grad.data[i];
  }
  const double loss = std::log(denom) - (scores.data[label] - mx);
  for (std::size_t i = 0; i < n; ++i) grad.data[i] /= denom;
  grad.data[label] -= 1.0;
  return {loss, std::move(grad)};
}

TripletResult triplet_cosine_loss(const Tensor& va, const Tensor& vp,
                                  const Tensor& vn, double alpha) {
  if (va.size() != vp.size() || va.size() != vn.size()) {
    throw DimensionError("triplet_cosine_loss: vector lengths differ");
  }
  if (!(alpha > 0.0)) {
    throw ArgumentError("triplet_cosine_loss: alpha must be positive");
  }
  const double sim_ap = dot(va, vp);
  const double sim_an = dot(va, vn);
  const double hinge = sim_an - sim_ap + alpha;

  TripletResult r;
  const std::size_t d = va.size();
  if (hinge > 0.0) {
    r.loss = hinge;
    r.grad_va = Tensor::zeros({d});
    r.grad_vp = Tensor::zeros({d});
    r.grad_vn = Tensor::zeros({d});
    for (std::size_t i = 0; i < d; ++i) {
      r.grad_va.data[i] = vn.data[i] - vp.data[i];
      r.grad_vp.data[i] = -va.data[i];
      r.grad_vn.data[i] = va.data[i];
    }
  } else {
    r.grad_va = Tensor::zeros({d});
    r.grad_vp = Tensor::zeros({d});
    r.grad_vn = Tensor::zeros({d});
  }
  return r;
}

double sparsity_dloss_drho(double rho_hat, double rho) {
  const double r = clamp_rho(rho);
  return -rho_hat / r + (1.0 - rho_hat) / (1.0 - r);
}

double sparsity_drho_dbeta(double rho) { return -clamp_rho(rho); }

SparsityResult sparsity_loss_and_grad(double rho_hat, double rho) {
  if (!(rho_hat > 0.0) || !(rho_hat < 1.0)) {
    throw ArgumentError("sparsity loss: rho_hat must lie in (0, 1)");
  }
  const double r = clamp_rho(rho);

  SparsityResult out;
  out.rho_clamped = r;
  out.loss = rho_hat * std::log(rho_hat / r) +
             (1.0 - rho_hat) * std::log((1.0 - rho_hat) / (1.0 - r));
  out.dloss_dbeta = (rho_hat - r) / (1.0 - r);

  // The chained surrogate route must reduce to the same closed form.
  const double chained = sparsity_dloss_drho(rho_hat, rho) * sparsity_drho_dbeta(rho);
  if (std::abs(chained - out.dloss_dbeta) > 1e-12) {
    throw NumericError("sparsity loss: surrogate gradient routes disagree");
  }
  return out;
}

double combined_loss(double l_cls, double l_tri, double l_spa,
                     const LossWeights& w) {
  return l_cls + w.lambda1 * l_tri + w.lambda2 * l_spa;
}

CategoryTree CategoryTree::build(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& nodes,
    const std::vector<std::pair<std::uint32_t, std::int64_t>>& categories) {
  CategoryTree tree;

  std::size_t root_count = 0;
  for (const auto& [id, parent] : nodes) {
    if (tree.parent_.count(id)) {
      throw FormatError("category tree: duplicate node id " + std::to_string(id));
    }
    tree.parent_[id] = parent;
    if (parent == -1) ++root_count;
  }
  if (root_count != 1) {
    throw FormatError("category tree: expected exactly one root, found " +
                      std::to_string(root_count));
  }

  // Depth of every node by walking parent chains; a walk longer than the node
  // count means a cycle or a parent outside the node set.
  std::unordered_set<std::int64_t> children_present;
  for (const auto& [id, parent] : tree.parent_) {
    if (parent != -1) {
      if (!tree.parent_.count(parent)) {
        throw FormatError("category tree: node " + std::to_string(id) +
                          " has unknown parent " + std::to_string(parent));
      }
      children_present.insert(parent);
    }
    std::size_t depth = 0;
    std::int64_t cur = id;
    while (tree.parent_.at(cur) != -1) {
      cur = tree.parent_.at(cur);
      ++depth;
      if (depth > tree.parent_.size()) {
        throw FormatError("category tree: cycle through node " + std::to_string(id));
      }
    }
    tree.depth_[id] = depth;
  }

  for (const auto& [id, depth] : tree.depth_) {
    if (!children_present.count(id)) {
      tree.height_ = std::max(tree.height_, depth);
    }
  }
  if (tree.height_ == 0) {
    throw FormatError("category tree: height must be at least 1");
  }

  for (const auto& [category, leaf] : categories) {
    if (!tree.parent_.count(leaf)) {
      throw FormatError("category tree: category " + std::to_string(category) +
                        " maps to unknown node " + std::to_string(leaf));
    }
    if (children_present.count(leaf)) {
      throw FormatError("category tree: category " + std::to_string(category) +
                        " maps to non-leaf node " + std::to_string(leaf));
    }
    if (!tree.category_leaf_.emplace(category, leaf).second) {
      throw FormatError("category tree: category " + std::to_string(category) +
                        " mapped twice");
    }
  }
  if (tree.category_leaf_.empty()) {
    throw FormatError("category tree: no category mappings");
  }
  return tree;
}

CategoryTree CategoryTree::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);

  std::vector<std::pair<std::int64_t, std::int64_t>> nodes;
  std::vector<std::pair<std::uint32_t, std::int64_t>> categories;
  std::string line;
  std::size_t line_no = 0;
  bool in_categories = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      if (!nodes.empty()) in_categories = true;
      continue;
    }
    std::istringstream ls(line);
    std::int64_t a = 0;
    std::int64_t b = 0;
    std::string rest;
    if (!(ls >> a >> b) || (ls >> rest)) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected two integers");
    }
    if (in_categories) {
      if (a < 0) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": category ids must be non-negative");
      }
      categories.emplace_back(static_cast<std::uint32_t>(a), b);
    } else {
      nodes.emplace_back(a, b);
    }
  }
  if (!in_categories) {
    throw FormatError(path + ": missing category section (blank-line separator)");
  }
  try {
    return build(nodes, categories);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

double CategoryTree::similarity(std::uint32_t c1, std::uint32_t c2) const {
  if (c1 == c2) {
    throw ArgumentError("category similarity is defined for distinct categories");
  }
  const auto it1 = category_leaf_.find(c1);
  const auto it2 = category_leaf_.find(c2);
  if (it1 == category_leaf_.end() || it2 == category_leaf_.end()) {
    throw ArgumentError("category " +
                        std::to_string(it1 == category_leaf_.end() ? c1 : c2) +
                        " is not in the tree");
  }
  std::int64_t a = it1->second;
  std::int64_t b = it2->second;
  std::size_t da = depth_.at(a);
  std::size_t db = depth_.at(b);
  while (da > db) {
    a = parent_.at(a);
    --da;
  }
  while (db > da) {
    b = parent_.at(b);
    --db;
  }
  while (a != b) {
    a = parent_.at(a);
    b = parent_.at(b);
    --da;
  }
  return static_cast<double>(da) / static_cast<double>(height_);
}

bool CategoryTree::has_category(std::uint32_t c) const {
  return category_leaf_.count(c) != 0;
}

double category_similarity(const CategoryTree& tree, std::uint32_t c1,
                           std::uint32_t c2) {
  return tree.similarity(c1, c2);
}

double adaptive_margin(double alpha, double similarity) {
  if (!(alpha > 0.0)) throw ArgumentError("adaptive_margin: alpha must be positive");
  if (similarity < 0.0 || similarity > 1.0) {
    throw ArgumentError("adaptive_margin: similarity must lie in [0, 1]");
  }
  const double scale = 1.0 + similarity;
  return alpha / (scale * scale);
}

}  // namespace e2bows
