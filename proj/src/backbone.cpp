#include "e2bows/backbone.hpp"

#include <cmath>
#include <random>

#include "binary_io.hpp"
#include "e2bows/errors.hpp"

namespace e2bows {

namespace {

struct BlockDims {
  std::size_t in_h, in_w, in_c;
  std::size_t out_c;        // after conv
  std::size_t pool_h, pool_w;
};

std::vector<BlockDims> block_dims(const BackboneConfig& cfg) {
  std::vector<BlockDims> dims;
  std::size_t h = cfg.input_height, w = cfg.input_width, c = cfg.input_channels;
  for (const auto& block : cfg.blocks) {
    BlockDims d{h, w, c, block.out_channels, h / 2, w / 2};
    dims.push_back(d);
    h = d.pool_h;
    w = d.pool_w;
    c = d.out_c;
  }
  return dims;
}

// Convolution, stride 1, zero same-padding. Input (h,w,cin), kernel
// (k,k,cin,cout), output (h,w,cout).
Tensor conv_same(const Tensor& input, const Tensor& weights, const Tensor& bias,
                 std::size_t h, std::size_t w, std::size_t cin, std::size_t k,
                 std::size_t cout) {
  const std::size_t pad = (k - 1) / 2;
  Tensor out = Tensor::zeros({h, w, cout});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double* out_px = &out.data[(y * w + x) * cout];
      for (std::size_t oc = 0; oc < cout; ++oc) out_px[oc] = bias.data[oc];
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::size_t iy = y + ky;
        if (iy < pad || iy - pad >= h) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::size_t ix = x + kx;
          if (ix < pad || ix - pad >= w) continue;
          const double* in_px = &input.data[((iy - pad) * w + (ix - pad)) * cin];
          const double* w_base = &weights.data[((ky * k + kx) * cin) * cout];
          for (std::size_t ic = 0; ic < cin; ++ic) {
            const double v = in_px[ic];
            if (v == 0.0) continue;
            const double* w_row = w_base + ic * cout;
            for (std::size_t oc = 0; oc < cout; ++oc) out_px[oc] += v * w_row[oc];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

void BackboneConfig::validate() const {
  if (input_height == 0 || input_width == 0 || input_channels == 0) {
    throw ArgumentError("backbone config: input dimensions must be positive");
  }
  if (blocks.empty()) throw ArgumentError("backbone config: at least one block");
  std::size_t h = input_height, w = input_width;
  for (const auto& block : blocks) {
    if (block.out_channels == 0) {
      throw ArgumentError("backbone config: out_channels must be positive");
    }
    if (block.kernel_size == 0 || block.kernel_size % 2 == 0) {
      throw ArgumentError("backbone config: kernel_size must be odd");
    }
    h /= 2;
    w /= 2;
    if (h == 0 || w == 0) {
      throw ArgumentError("backbone config: spatial size collapses to zero");
    }
  }
}

std::size_t BackboneConfig::output_height() const {
  std::size_t h = input_height;
  for (std::size_t i = 0; i < blocks.size(); ++i) h /= 2;
  return h;
}

std::size_t BackboneConfig::output_width() const {
  std::size_t w = input_width;
  for (std::size_t i = 0; i < blocks.size(); ++i) w /= 2;
  return w;
}

std::size_t BackboneConfig::output_channels() const {
  return blocks.empty() ? input_channels : blocks.back().out_channels;
}

BackboneParams BackboneParams::init(const BackboneConfig& config) {
  config.validate();
  BackboneParams params;
  params.config = config;
  std::mt19937_64 rng(config.rng_seed);
  std::size_t in_c = config.input_channels;
  for (const auto& block : config.blocks) {
    const std::size_t k = block.kernel_size;
    const std::size_t out_c = block.out_channels;
    const double fan_in = static_cast<double>(k * k * in_c);
    const double fan_out = static_cast<double>(k * k * out_c);
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-s, s);
    ConvLayerParams layer;
    layer.weights = Tensor::zeros({k, k, in_c, out_c});
    for (auto& v : layer.weights.data) v = u(rng);
    layer.bias = Tensor::zeros({out_c});
    params.layers.push_back(std::move(layer));
    in_c = out_c;
  }
  return params;
}

std::pair<FeatureMaps, BackboneForwardCache> backbone_forward(
    const Tensor& image, const BackboneParams& params) {
  const BackboneConfig& cfg = params.config;
  if (image.shape != std::vector<std::size_t>{cfg.input_height, cfg.input_width,
                                              cfg.input_channels}) {
    throw DimensionError("backbone_forward: image shape does not match config");
  }

  BackboneForwardCache cache;
  Tensor current = image;
  const auto dims = block_dims(cfg);
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const auto& d = dims[li];
    const std::size_t k = cfg.blocks[li].kernel_size;
    cache.layer_inputs.push_back(current);

    Tensor z = conv_same(current, params.layers[li].weights,
                         params.layers[li].bias, d.in_h, d.in_w, d.in_c, k,
                         d.out_c);
    cache.pre_activations.push_back(z);

    // ReLU then 2x2 max-pool (stride 2); ties go to the first cell scanned.
    Tensor pooled = Tensor::zeros({d.pool_h, d.pool_w, d.out_c});
    std::vector<std::size_t> argmax(pooled.size());
    for (std::size_t py = 0; py < d.pool_h; ++py) {
      for (std::size_t px = 0; px < d.pool_w; ++px) {
        for (std::size_t c = 0; c < d.out_c; ++c) {
          double best = -1.0;
          std::size_t best_idx = 0;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx =
                  ((2 * py + dy) * d.in_w + (2 * px + dx)) * d.out_c + c;
              const double a = z.data[idx] > 0.0 ? z.data[idx] : 0.0;
              if (a > best) {
                best = a;
                best_idx = idx;
              }
            }
          }
          const std::size_t out_idx = (py * d.pool_w + px) * d.out_c + c;
          pooled.data[out_idx] = best;
          argmax[out_idx] = best_idx;
        }
      }
    }
    cache.pool_argmax.push_back(std::move(argmax));
    current = std::move(pooled);
  }

  FeatureMaps maps;
  maps.height = cfg.output_height();
  maps.width = cfg.output_width();
  maps.channels = cfg.output_channels();
  maps.values = std::move(current.data);
  return {std::move(maps), std::move(cache)};
}

BackboneGrads backbone_backward(const BackboneParams& params,
                                const BackboneForwardCache& cache,
                                const Tensor& grad_output) {
  const BackboneConfig& cfg = params.config;
  if (cache.layer_inputs.size() != params.layers.size()) {
    throw DimensionError("backbone_backward: cache does not match params");
  }
  const auto dims = block_dims(cfg);
  const auto& last = dims.back();
  if (grad_output.size() != last.pool_h * last.pool_w * last.out_c) {
    throw DimensionError("backbone_backward: grad_output shape mismatch");
  }

  BackboneGrads grads;
  grads.layers.resize(params.layers.size());
  Tensor grad_pooled = grad_output;

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& d = dims[li];
    const std::size_t k = cfg.blocks[li].kernel_size;
    const std::size_t pad = (k - 1) / 2;
    const Tensor& z = cache.pre_activations[li];
    const Tensor& input = cache.layer_inputs[li];

    // Unpool: route each pooled gradient to the winning activation, then
    // apply the ReLU mask to reach the conv pre-activation.
    Tensor grad_z = Tensor::zeros({d.in_h, d.in_w, d.out_c});
    const auto& argmax = cache.pool_argmax[li];
    for (std::size_t i = 0; i < grad_pooled.size(); ++i) {
      const std::size_t src = argmax[i];
      if (z.data[src] > 0.0) grad_z.data[src] += grad_pooled.data[i];
    }

    ConvLayerParams& layer_grad = grads.layers[li];
    layer_grad.weights = Tensor::zeros({k, k, d.in_c, d.out_c});
    layer_grad.bias = Tensor::zeros({d.out_c});
    Tensor grad_in = Tensor::zeros({d.in_h, d.in_w, d.in_c});
    const Tensor& weights = params.layers[li].weights;

    for (std::size_t y = 0; y < d.in_h; ++y) {
      for (std::size_t x = 0; x < d.in_w; ++x) {
        const double* gz_px = &grad_z.data[(y * d.in_w + x) * d.out_c];
        for (std::size_t oc = 0; oc < d.out_c; ++oc) {
          layer_grad.bias.data[oc] += gz_px[oc];
        }
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::size_t iy = y + ky;
          if (iy < pad || iy - pad >= d.in_h) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t ix = x + kx;
            if (ix < pad || ix - pad >= d.in_w) continue;
            const std::size_t in_base = ((iy - pad) * d.in_w + (ix - pad)) * d.in_c;
            const std::size_t w_base = ((ky * k + kx) * d.in_c) * d.out_c;
            for (std::size_t ic = 0; ic < d.in_c; ++ic) {
              const double in_v = input.data[in_base + ic];
              const double* w_row = &weights.data[w_base + ic * d.out_c];
              double* gw_row = &layer_grad.weights.data[w_base + ic * d.out_c];
              double acc = 0.0;
              for (std::size_t oc = 0; oc < d.out_c; ++oc) {
                const double g = gz_px[oc];
                gw_row[oc] += in_v * g;
                acc += w_row[oc] * g;
              }
              grad_in.data[in_base + ic] += acc;
            }
          }
        }
      }
    }
    grad_pooled = std::move(grad_in);
  }

  grads.grad_image = std::move(grad_pooled);
  return grads;
}

void write_feature_file(
    const std::string& path,
    const std::vector<std::pair<std::uint64_t, FeatureMaps>>& records) {
  std::size_t h = 0, w = 0, c = 0;
  if (!records.empty()) {
    h = records.front().second.height;
    w = records.front().second.width;
    c = records.front().second.channels;
  }
  for (const auto& [id, maps] : records) {
    (void)id;
    if (maps.height != h || maps.width != w || maps.channels != c) {
      throw DimensionError("write_feature_file: records differ in shape");
    }
  }
  detail::BinaryWriter out(path);
  out.magic("E2FM");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(records.size()));
  out.u32(static_cast<std::uint32_t>(h));
  out.u32(static_cast<std::uint32_t>(w));
  out.u32(static_cast<std::uint32_t>(c));
  for (const auto& [id, maps] : records) {
    out.u64(id);
    for (double v : maps.values) out.f32(static_cast<float>(v));
  }
  out.close();
}

std::vector<std::pair<std::uint64_t, FeatureMaps>> read_feature_file(
    const std::string& path) {
  detail::BinaryReader in(path);
  in.expect_magic("E2FM");
  const std::uint32_t version = in.u32();
  if (version != 1) in.fail("unsupported version " + std::to_string(version));
  const std::uint32_t count = in.u32();
  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  const std::uint32_t c = in.u32();
  if (count > 0 && (h == 0 || w == 0 || c == 0)) {
    in.fail("zero feature-map shape with nonzero record count");
  }
  std::vector<std::pair<std::uint64_t, FeatureMaps>> records;
  records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint64_t id = in.u64();
    FeatureMaps maps;
    maps.height = h;
    maps.width = w;
    maps.channels = c;
    maps.values.resize(static_cast<std::size_t>(h) * w * c);
    for (auto& v : maps.values) v = static_cast<double>(in.f32());
    records.emplace_back(id, std::move(maps));
  }
  in.expect_eof();
  return records;
}

}  // namespace e2bows
