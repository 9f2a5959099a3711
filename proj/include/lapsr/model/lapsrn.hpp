#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor/init.hpp"
#include "lapsr/tensor/ops.hpp"
#include "lapsr/tensor/optim.hpp"
#include "lapsr/tensor/tensor.hpp"

namespace lapsr {

struct ModelConfig {
  std::uint32_t scale = 4;
  std::uint32_t convs_per_level = 10;
  std::uint32_t feature_channels = 64;
  std::uint32_t image_channels = 3;
  double leaky_slope = 0.2;

  std::uint32_t levels() const { return static_cast<std::uint32_t>(std::countr_zero(scale)); }

  void validate() const {
    if (scale < 2 || !std::has_single_bit(scale))
      throw ConfigError("model scale must be a power of two >= 2, got " + std::to_string(scale));
    if (convs_per_level < 1) throw ConfigError("convs_per_level must be >= 1");
    if (feature_channels < 1 || image_channels < 1) throw ConfigError("channel counts must be >= 1");
    if (!(leaky_slope > 0 && leaky_slope < 1)) throw ConfigError("leaky_slope must lie in (0, 1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kUpKernel = 4;
inline constexpr std::size_t kUpStride = 2;
inline constexpr std::size_t kUpPadding = 1;

// Name and shape of every learnable tensor, in canonical order. Weight/bias
// pairs alternate: embed, then per level: conv0..conv{d-1}, feature_up,
// residual, image_up.
inline std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t f = cfg.feature_channels, c = cfg.image_channels;
  std::vector<std::pair<std::string, Shape>> out;
  auto pair = [&](const std::string& name, Shape w, std::size_t bias_len) {
    out.emplace_back(name + ".weight", w);
    out.emplace_back(name + ".bias", Shape{1, 1, 1, bias_len});
  };
  pair("embed", Shape{f, c, kConvKernel, kConvKernel}, f);
  for (std::uint32_t s = 1; s <= cfg.levels(); ++s) {
    const std::string lv = "level" + std::to_string(s) + ".";
    for (std::uint32_t i = 0; i < cfg.convs_per_level; ++i)
      pair(lv + "conv" + std::to_string(i), Shape{f, f, kConvKernel, kConvKernel}, f);
    pair(lv + "feature_up", Shape{f, f, kUpKernel, kUpKernel}, f);
    pair(lv + "residual", Shape{c, f, kConvKernel, kConvKernel}, c);
    pair(lv + "image_up", Shape{c, c, kUpKernel, kUpKernel}, c);
  }
  return out;
}

// Learnable tensors of one pyramid network, in parameter_layout order.
template <class T>
struct ModelParams {
  ModelConfig config;
  std::vector<NamedTensor<T>> tensors;

  const Tensor<T>& get(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t.value;
    throw ConfigError("no parameter named '" + name + "'");
  }
  Tensor<T>& get(const std::string& name) {
    return const_cast<Tensor<T>&>(std::as_const(*this).get(name));
  }

  std::size_t weight_bias_pairs() const { return tensors.size() / 2; }

  ModelParams clone() const {
    ModelParams out{config, {}};
    for (const auto& t : tensors) out.tensors.push_back({t.name, t.value.clone()});
    return out;
  }
};

// He init for every 3x3 conv, per-channel bilinear for both upsamplers, zero
// biases everywhere. Each tensor draws from its own stream of the seed.
template <class T>
ModelParams<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<T> params{cfg, {}};
  std::uint64_t stream = 0;
  for (const auto& [name, shape] : parameter_layout(cfg)) {
    Tensor<T> value;
    if (name.ends_with(".bias")) {
      value = Tensor<T>(shape);
    } else if (name.find("_up.") != std::string::npos) {
      value = init_bilinear_upsampler<T>(shape.n, shape.h);
    } else {
      value = init_he_gaussian<T>(shape, mix_seed(seed, stream));
    }
    ++stream;
    value.set_requires_grad(true);
    params.tensors.push_back({name, std::move(value)});
  }
  return params;
}

// Predicted images at every pyramid level; level s (1-based) is images[s-1]
// with spatial dims 2^s times the input.
template <class T>
struct PyramidOutput {
  std::vector<Tensor<T>> images;
};

namespace detail {

template <class T>
void check_input(const ModelConfig& cfg, const Tensor<T>& x) {
  if (x.shape().c != cfg.image_channels)
    throw ShapeError("model input has " + std::to_string(x.shape().c) + " channels, expected " +
                     std::to_string(cfg.image_channels));
  if (x.shape().h < 1 || x.shape().w < 1) throw ShapeError("model input is empty");
}

template <class T>
PyramidOutput<T> run_levels(const ModelParams<T>& p, const Tensor<T>& x, std::uint32_t levels) {
  const ModelConfig& cfg = p.config;
  check_input(cfg, x);
  const T slope = static_cast<T>(cfg.leaky_slope);
  auto conv = [&](const Tensor<T>& in, const std::string& name) {
    return conv2d(in, p.get(name + ".weight"), p.get(name + ".bias"), 1, 1);
  };
  auto up = [&](const Tensor<T>& in, const std::string& name) {
    return conv_transpose2d(in, p.get(name + ".weight"), p.get(name + ".bias"), kUpStride, kUpPadding);
  };

  PyramidOutput<T> out;
  Tensor<T> features = leaky_relu(conv(x, "embed"), slope);
  Tensor<T> image = x;
  for (std::uint32_t s = 1; s <= levels; ++s) {
    const std::string lv = "level" + std::to_string(s) + ".";
    for (std::uint32_t i = 0; i < cfg.convs_per_level; ++i)
      features = leaky_relu(conv(features, lv + "conv" + std::to_string(i)), slope);
    features = leaky_relu(up(features, lv + "feature_up"), slope);
    const Tensor<T> residual = conv(features, lv + "residual");
    image = add(up(image, lv + "image_up"), residual);
    out.images.push_back(image);
  }
  return out;
}

}  // namespace detail

template <class T>
PyramidOutput<T> forward(const ModelParams<T>& params, const Tensor<T>& lr_image) {
  return detail::run_levels(params, lr_image, params.config.levels());
}

// Output of the level matching `requested_scale`; deeper levels are skipped.
template <class T>
Tensor<T> infer_at_scale(const ModelParams<T>& params, const Tensor<T>& lr_image,
                         std::uint32_t requested_scale) {
  if (requested_scale < 2 || !std::has_single_bit(requested_scale))
    throw ConfigError("requested scale " + std::to_string(requested_scale) +
                      " is not a power of two >= 2");
  if (requested_scale > params.config.scale)
    throw ConfigError("requested scale " + std::to_string(requested_scale) +
                      " exceeds model scale " + std::to_string(params.config.scale));
  const auto level = static_cast<std::uint32_t>(std::countr_zero(requested_scale));
  return detail::run_levels(params, lr_image, level).images.back();
}

}  // namespace lapsr
