#include "e2bows/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.hpp"
#include "e2bows/errors.hpp"

namespace e2bows {

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ArgumentError("train config: loss weights must be non-negative");
  }
  if (!(alpha > 0.0)) throw ArgumentError("train config: alpha must be positive");
  if (!(rho_hat > 0.0) || !(rho_hat < 1.0)) {
    throw ArgumentError("train config: rho_hat must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0) || !(beta_learning_rate > 0.0)) {
    throw ArgumentError("train config: learning rates must be positive");
  }
  if (batch_size == 0) throw ArgumentError("train config: batch size must be positive");
  if (words_per_sfm == 0) throw ArgumentError("train config: m must be positive");
}

ModelParams ModelParams::init(const BackboneConfig& config,
                              std::uint32_t class_count,
                              std::uint32_t words_per_sfm) {
  config.validate();
  ModelParams p;
  p.backbone = BackboneParams::init(config);
  p.classifier = ClassifierWeights::init(config.output_channels(), class_count,
                                         config.rng_seed + 1);
  p.bowl = BowlParams::init(class_count,
                            config.output_height() * config.output_width(),
                            words_per_sfm, config.rng_seed + 2);
  return p;
}

TripletBatch sample_triplets(const std::vector<std::uint32_t>& labels,
                             const CategoryTree* tree, double alpha,
                             std::size_t count, std::mt19937_64& rng) {
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  if (by_label.size() < 2) {
    throw ArgumentError("triplet sampling needs at least two distinct labels");
  }

  std::vector<std::size_t> anchors;  // images with at least one positive partner
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (by_label[labels[i]].size() >= 2) anchors.push_back(i);
  }
  TripletBatch batch;
  if (anchors.empty()) return batch;

  batch.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    Triplet trip;
    trip.anchor = anchors[std::uniform_int_distribution<std::size_t>(
        0, anchors.size() - 1)(rng)];
    const std::uint32_t label_a = labels[trip.anchor];

    const auto& same = by_label[label_a];
    std::size_t r = std::uniform_int_distribution<std::size_t>(0, same.size() - 2)(rng);
    for (std::size_t idx : same) {
      if (idx == trip.anchor) continue;
      if (r == 0) {
        trip.positive = idx;
        break;
      }
      --r;
    }

    const std::size_t other_count = labels.size() - same.size();
    r = std::uniform_int_distribution<std::size_t>(0, other_count - 1)(rng);
    for (std::size_t idx = 0; idx < labels.size(); ++idx) {
      if (labels[idx] == label_a) continue;
      if (r == 0) {
        trip.negative = idx;
        break;
      }
      --r;
    }

    const std::uint32_t label_n = labels[trip.negative];
    trip.margin =
        tree ? adaptive_margin(alpha, tree->similarity(label_a, label_n)) : alpha;
    batch.push_back(trip);
  }
  return batch;
}

namespace {

void check_finite(double value, const char* component) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(component) + " loss is not finite");
  }
}

void axpy(std::vector<double>& target, const std::vector<double>& g, double scale) {
  for (std::size_t i = 0; i < target.size(); ++i) target[i] += scale * g[i];
}

void sgd(std::vector<double>& weights, const std::vector<double>& grads, double lr) {
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= lr * grads[i];
}

}  // namespace

LossReport train_step(const std::vector<const Tensor*>& images,
                      const std::vector<std::uint32_t>& labels,
                      const TripletBatch& triplets, ModelParams& params,
                      const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t batch = images.size();
  if (batch == 0) throw ArgumentError("train_step: empty batch");
  if (labels.size() != batch) {
    throw DimensionError("train_step: labels do not match batch size");
  }
  for (const Triplet& t : triplets) {
    if (t.anchor >= batch || t.positive >= batch || t.negative >= batch) {
      throw ArgumentError("train_step: triplet index outside batch");
    }
  }

  const ConvKernels kernels = fc_to_conv(params.classifier);

  // Forward: keep every cache alive for the batch backward pass.
  std::vector<FeatureMaps> features(batch);
  std::vector<BackboneForwardCache> backbone_caches(batch);
  std::vector<SfmStack> stacks(batch);
  std::vector<BowlForwardCache> bowl_caches(batch);
  std::vector<Tensor> raw_words(batch);
  std::vector<Tensor> normalized(batch);
  std::vector<Tensor> score_grads(batch);

  double l_cls = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    auto [f, bc] = backbone_forward(*images[i], params.backbone);
    features[i] = std::move(f);
    backbone_caches[i] = std::move(bc);
    stacks[i] = compute_sfms(features[i], kernels);

    auto [ce, gscores] =
        softmax_cross_entropy(Tensor::vector(stacks[i].avg), labels[i]);
    l_cls += ce;
    score_grads[i] = std::move(gscores);

    const auto mask = active_sfm_mask(stacks[i]);
    auto [raw, cache] = bowl_forward(stacks[i], mask, params.bowl);
    raw_words[i] = std::move(raw);
    bowl_caches[i] = std::move(cache);
    normalized[i] = l2_normalize(raw_words[i]);
  }
  l_cls /= static_cast<double>(batch);

  const double rho = sparsity_ratio(normalized, params.bowl.beta);
  const SparsityResult spa = sparsity_loss_and_grad(cfg.rho_hat, rho);

  // Triplet term over the normalized, unthresholded words.
  double l_tri = 0.0;
  std::vector<Tensor> word_grads(batch);
  const std::size_t n_triplets = triplets.size();
  if (n_triplets > 0) {
    for (std::size_t i = 0; i < batch; ++i) {
      word_grads[i] = Tensor::zeros({params.bowl.dim()});
    }
    for (const Triplet& t : triplets) {
      const TripletResult r =
          triplet_cosine_loss(normalized[t.anchor], normalized[t.positive],
                              normalized[t.negative], t.margin);
      l_tri += r.loss;
      axpy(word_grads[t.anchor].data, r.grad_va.data, 1.0);
      axpy(word_grads[t.positive].data, r.grad_vp.data, 1.0);
      axpy(word_grads[t.negative].data, r.grad_vn.data, 1.0);
    }
    l_tri /= static_cast<double>(n_triplets);
  }

  check_finite(l_cls, "classification");
  check_finite(l_tri, "triplet");
  check_finite(spa.loss, "sparsity");

  // Backward: gradients of l_cls + lambda1 * l_tri, accumulated over the batch.
  const std::size_t plane = stacks[0].height * stacks[0].width;
  const double cls_scale = 1.0 / (static_cast<double>(batch) * static_cast<double>(plane));
  const double tri_scale =
      n_triplets > 0 ? cfg.lambda1 / static_cast<double>(n_triplets) : 0.0;

  std::vector<double> grad_cls_w(params.classifier.weights.size(), 0.0);
  std::vector<double> grad_cls_b(params.classifier.biases.size(), 0.0);
  std::vector<double> grad_bowl_w(params.bowl.weights.size(), 0.0);
  std::vector<double> grad_bowl_b(params.bowl.biases.size(), 0.0);
  BackboneGrads backbone_total;
  if (!cfg.freeze_backbone) {
    backbone_total.layers.resize(params.backbone.layers.size());
    for (std::size_t l = 0; l < params.backbone.layers.size(); ++l) {
      backbone_total.layers[l].weights =
          Tensor::zeros(params.backbone.layers[l].weights.shape);
      backbone_total.layers[l].bias =
          Tensor::zeros(params.backbone.layers[l].bias.shape);
    }
  }

  for (std::size_t i = 0; i < batch; ++i) {
    std::vector<double> grad_maps(params.classifier.categories * plane, 0.0);

    if (tri_scale != 0.0) {
      Tensor gv = word_grads[i];
      for (double& g : gv.data) g *= tri_scale;
      const Tensor graw = l2_normalize_backward(raw_words[i], gv);
      BowlGrads bg = bowl_backward(params.bowl, bowl_caches[i], graw);
      axpy(grad_bowl_w, bg.grad_weights, 1.0);
      axpy(grad_bowl_b, bg.grad_biases, 1.0);
      grad_maps = std::move(bg.grad_maps);
    }

    // The classification score of a category is its map average, so its
    // gradient spreads uniformly over the map cells.
    for (std::size_t cat = 0; cat < params.classifier.categories; ++cat) {
      const double g = score_grads[i].data[cat] * cls_scale;
      double* cells = &grad_maps[cat * plane];
      for (std::size_t cell = 0; cell < plane; ++cell) cells[cell] += g;
    }

    const SfmBackwardResult sb = compute_sfms_backward(features[i], kernels, grad_maps);
    axpy(grad_cls_w, sb.grad_weights, 1.0);
    axpy(grad_cls_b, sb.grad_biases, 1.0);

    if (!cfg.freeze_backbone) {
      const Tensor grad_features(
          {features[i].height, features[i].width, features[i].channels},
          sb.grad_features.values);
      const BackboneGrads bb =
          backbone_backward(params.backbone, backbone_caches[i], grad_features);
      for (std::size_t l = 0; l < backbone_total.layers.size(); ++l) {
        axpy(backbone_total.layers[l].weights.data, bb.layers[l].weights.data, 1.0);
        axpy(backbone_total.layers[l].bias.data, bb.layers[l].bias.data, 1.0);
      }
    }
  }

  sgd(params.classifier.weights, grad_cls_w, cfg.learning_rate);
  sgd(params.classifier.biases, grad_cls_b, cfg.learning_rate);
  sgd(params.bowl.weights, grad_bowl_w, cfg.learning_rate);
  sgd(params.bowl.biases, grad_bowl_b, cfg.learning_rate);
  if (!cfg.freeze_backbone) {
    for (std::size_t l = 0; l < params.backbone.layers.size(); ++l) {
      sgd(params.backbone.layers[l].weights.data,
          backbone_total.layers[l].weights.data, cfg.learning_rate);
      sgd(params.backbone.layers[l].bias.data, backbone_total.layers[l].bias.data,
          cfg.learning_rate);
    }
  }

  params.bowl.beta -= cfg.beta_learning_rate * cfg.lambda2 * spa.dloss_dbeta;
  if (params.bowl.beta < 0.0) params.bowl.beta = 0.0;

  LossReport report;
  report.classification = l_cls;
  report.triplet = l_tri;
  report.sparsity = spa.loss;
  report.rho = rho;
  report.beta = params.bowl.beta;
  report.total = combined_loss(
      l_cls, l_tri, spa.loss,
      LossWeights{cfg.lambda1, cfg.lambda2, cfg.alpha, cfg.rho_hat});
  return report;
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg,
                  const CategoryTree* tree) {
  cfg.validate();
  dataset.validate();
  if (dataset.images.empty()) throw ArgumentError("train: empty dataset");

  std::unordered_set<std::uint32_t> distinct;
  for (const DatasetImage& img : dataset.images) distinct.insert(img.labels[0]);
  if (distinct.size() < 2) {
    throw ArgumentError("train: need at least two distinct classes");
  }

  BackboneConfig backbone_config;
  backbone_config.input_height = dataset.height;
  backbone_config.input_width = dataset.width;
  backbone_config.input_channels = dataset.channels;
  backbone_config.rng_seed = cfg.rng_seed;

  TrainResult result;
  result.params =
      ModelParams::init(backbone_config, dataset.class_count, cfg.words_per_sfm);

  const std::size_t n = dataset.images.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.rng_seed + 0x9e3779b97f4a7c15ULL);

  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  result.history.reserve(static_cast<std::size_t>(cfg.epochs) * steps_per_epoch);

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, n);

      std::vector<const Tensor*> images;
      std::vector<std::uint32_t> labels;
      images.reserve(end - begin);
      labels.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        images.push_back(&dataset.images[order[i]].pixels);
        labels.push_back(dataset.images[order[i]].labels[0]);
      }

      // A batch can collapse to one class after shuffling; it still trains
      // the classifier, just without a triplet term.
      TripletBatch triplets;
      std::unordered_set<std::uint32_t> batch_labels(labels.begin(), labels.end());
      if (batch_labels.size() >= 2 && cfg.lambda1 > 0.0) {
        triplets = sample_triplets(labels, tree, cfg.alpha, cfg.batch_size, rng);
      }
      result.history.push_back(
          train_step(images, labels, triplets, result.params, cfg));
    }
  }
  return result;
}

Tensor image_raw_words(const ModelParams& params, const Tensor& image) {
  const auto [features, cache] = backbone_forward(image, params.backbone);
  (void)cache;
  const SfmStack stack = compute_sfms(features, fc_to_conv(params.classifier));
  auto [raw, bowl_cache] = bowl_forward(stack, active_sfm_mask(stack), params.bowl);
  (void)bowl_cache;
  return std::move(raw);
}

namespace {

void write_tensor(detail::BinaryWriter& out, const Tensor& t) {
  out.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) out.u64(d);
  for (double v : t.data) out.f64(v);
}

Tensor read_tensor(detail::BinaryReader& in) {
  const std::uint32_t ndim = in.u32();
  if (ndim == 0 || ndim > 8) in.fail("bad tensor rank " + std::to_string(ndim));
  std::vector<std::size_t> shape(ndim);
  for (auto& d : shape) d = in.u64();
  const std::size_t total = shape_product(shape);
  if (total > (1u << 28)) in.fail("tensor too large");
  std::vector<double> data(total);
  for (double& v : data) v = in.f64();
  return Tensor(std::move(shape), std::move(data));
}

void write_doubles(detail::BinaryWriter& out, const std::vector<double>& v) {
  out.u64(v.size());
  for (double x : v) out.f64(x);
}

std::vector<double> read_doubles(detail::BinaryReader& in, std::size_t expected) {
  const std::uint64_t count = in.u64();
  if (count != expected) {
    in.fail("parameter vector length " + std::to_string(count) + ", expected " +
            std::to_string(expected));
  }
  std::vector<double> v(count);
  for (double& x : v) x = in.f64();
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const TrainConfig& cfg,
                     const std::string& path) {
  detail::BinaryWriter out(path);
  out.magic("E2BW");
  out.u32(1);

  out.f64(cfg.lambda1);
  out.f64(cfg.lambda2);
  out.f64(cfg.alpha);
  out.f64(cfg.rho_hat);
  out.f64(cfg.learning_rate);
  out.f64(cfg.beta_learning_rate);
  out.u32(cfg.batch_size);
  out.u32(cfg.epochs);
  out.u64(cfg.rng_seed);
  out.u32(cfg.words_per_sfm);
  out.u8(cfg.freeze_backbone ? 1 : 0);

  const BackboneConfig& bc = params.backbone.config;
  out.u32(static_cast<std::uint32_t>(bc.input_height));
  out.u32(static_cast<std::uint32_t>(bc.input_width));
  out.u32(static_cast<std::uint32_t>(bc.input_channels));
  out.u64(bc.rng_seed);
  out.u32(static_cast<std::uint32_t>(bc.blocks.size()));
  for (const ConvBlockSpec& b : bc.blocks) {
    out.u32(static_cast<std::uint32_t>(b.kernel_size));
    out.u32(static_cast<std::uint32_t>(b.out_channels));
  }
  out.u32(static_cast<std::uint32_t>(params.classifier.categories));

  for (const ConvLayerParams& layer : params.backbone.layers) {
    write_tensor(out, layer.weights);
    write_tensor(out, layer.bias);
  }
  write_doubles(out, params.classifier.weights);
  write_doubles(out, params.classifier.biases);
  write_doubles(out, params.bowl.weights);
  write_doubles(out, params.bowl.biases);
  out.f64(params.bowl.beta);
  out.close();
}

std::pair<ModelParams, TrainConfig> load_checkpoint(const std::string& path) {
  detail::BinaryReader in(path);
  in.expect_magic("E2BW");
  const std::uint32_t version = in.u32();
  if (version != 1) in.fail("unsupported version " + std::to_string(version));

  TrainConfig cfg;
  cfg.lambda1 = in.f64();
  cfg.lambda2 = in.f64();
  cfg.alpha = in.f64();
  cfg.rho_hat = in.f64();
  cfg.learning_rate = in.f64();
  cfg.beta_learning_rate = in.f64();
  cfg.batch_size = in.u32();
  cfg.epochs = in.u32();
  cfg.rng_seed = in.u64();
  cfg.words_per_sfm = in.u32();
  cfg.freeze_backbone = in.u8() != 0;

  BackboneConfig bc;
  bc.input_height = in.u32();
  bc.input_width = in.u32();
  bc.input_channels = in.u32();
  bc.rng_seed = in.u64();
  const std::uint32_t n_blocks = in.u32();
  if (n_blocks == 0 || n_blocks > 16) in.fail("bad block count");
  bc.blocks.clear();
  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    ConvBlockSpec spec;
    spec.kernel_size = in.u32();
    spec.out_channels = in.u32();
    bc.blocks.push_back(spec);
  }
  const std::uint32_t class_count = in.u32();
  try {
    bc.validate();
  } catch (const Error& e) {
    in.fail(e.what());
  }

  ModelParams params;
  params.backbone.config = bc;
  params.backbone.layers.resize(bc.blocks.size());
  std::size_t in_ch = bc.input_channels;
  for (std::size_t l = 0; l < bc.blocks.size(); ++l) {
    params.backbone.layers[l].weights = read_tensor(in);
    params.backbone.layers[l].bias = read_tensor(in);
    const std::vector<std::size_t> expected = {bc.blocks[l].kernel_size,
                                               bc.blocks[l].kernel_size, in_ch,
                                               bc.blocks[l].out_channels};
    if (params.backbone.layers[l].weights.shape != expected ||
        params.backbone.layers[l].bias.size() != bc.blocks[l].out_channels) {
      in.fail("layer " + std::to_string(l) + " shape mismatch");
    }
    in_ch = bc.blocks[l].out_channels;
  }

  const std::size_t channels = bc.output_channels();
  const std::size_t map_size = bc.output_height() * bc.output_width();
  params.classifier.channels = channels;
  params.classifier.categories = class_count;
  params.classifier.weights = read_doubles(in, channels * class_count);
  params.classifier.biases = read_doubles(in, class_count);

  params.bowl.categories = class_count;
  params.bowl.map_size = map_size;
  params.bowl.words_per_sfm = cfg.words_per_sfm;
  params.bowl.weights = read_doubles(in, class_count * map_size * cfg.words_per_sfm);
  params.bowl.biases = read_doubles(in, class_count * cfg.words_per_sfm);
  params.bowl.beta = in.f64();
  in.expect_eof();
  return {std::move(params), cfg};
}

}  // namespace e2bows
