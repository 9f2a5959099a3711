#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/corpus.hpp"
#include "lapsr/imaging/image.hpp"
#include "lapsr/imaging/png_io.hpp"
#include "lapsr/imaging/resize.hpp"
#include "lapsr/metrics/report.hpp"
#include "lapsr/model/lapsrn.hpp"

namespace lapsr {

// Runs the model on one image at `scale` and clamps the result to [0, 1].
template <class T>
Image superresolve(const ModelParams<T>& params, const Image& input, std::uint32_t scale) {
  if (input.channels != params.config.image_channels)
    throw ShapeError("input has " + std::to_string(input.channels) + " channels, model expects " +
                     std::to_string(params.config.image_channels));
  return from_tensor(infer_at_scale(params, to_tensor<T>(input), scale)).clamp();
}

// An upscaler under evaluation. `max_scale` of 0 means unbounded.
struct SrMethod {
  std::string name;
  std::uint32_t max_scale = 0;
  std::function<Image(const Image& lr, std::uint32_t scale)> upscale;
};

inline SrMethod bicubic_method() {
  return {"bicubic", 0, [](const Image& lr, std::uint32_t s) {
            return bicubic_resize(lr, lr.width * s, lr.height * s).clamp();
          }};
}

template <class T>
SrMethod model_method(ModelParams<T> params, std::string name = "model") {
  const auto max = params.config.scale;
  return {std::move(name), max,
          [p = std::move(params)](const Image& lr, std::uint32_t s) { return superresolve(p, lr, s); }};
}

inline void check_eval_scale(std::uint32_t scale) {
  if (scale != 2 && scale != 4 && scale != 8)
    throw ConfigError("evaluation scale must be 2, 4 or 8 (got " + std::to_string(scale) + ")");
}

// Rounds every sample to the nearest 8-bit level, as a saved PNG would.
inline Image quantize8(Image img) {
  for (double& v : img.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

inline Image crop_to_multiple(const Image& img, std::uint32_t scale) {
  const std::size_t w = img.width / scale * scale, h = img.height / scale * scale;
  if (w == 0 || h == 0)
    throw ShapeError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) + " is smaller than scale " +
                     std::to_string(scale));
  if (w == img.width && h == img.height) return img;
  Image out(w, h, img.channels);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x, y, c);
  return out;
}

// Builds one evaluation pair: ground truth cropped to a multiple of `scale`,
// its bicubic reduction as the input, and the method's 8-bit output.
inline EvalPair make_eval_pair(const SrMethod& method, const std::string& label, const Image& hr, std::uint32_t scale) {
  EvalPair pair{label, crop_to_multiple(hr, scale), std::nullopt, {}};
  const Image lr = quantize8(bicubic_resize(pair.reference, pair.reference.width / scale, pair.reference.height / scale));
  pair.sr = quantize8(method.upscale(lr, scale));
  return pair;
}

// Scores `method` on the test split; unreadable or failing images become
// error rows. The border shave equals the scale.
inline EvalReport evaluate(const SrMethod& method, const CorpusManifest& manifest, std::uint32_t scale,
                           const MetricConfig& metrics = {}) {
  check_eval_scale(scale);
  if (method.max_scale != 0 && scale > method.max_scale)
    throw ConfigError("method '" + method.name + "' supports scales up to " + std::to_string(method.max_scale) +
                      ", requested " + std::to_string(scale));
  const auto entries = manifest.select(Split::kTest);
  if (entries.empty()) throw ConfigError("manifest has no test entries");
  std::vector<EvalPair> pairs;
  for (const auto& e : entries) {
    try {
      pairs.push_back(make_eval_pair(method, e.path, load_image(manifest.resolve(e)), scale));
    } catch (const Error& err) {
      pairs.push_back(EvalPair{e.path, {}, std::nullopt, err.what()});
    }
  }
  return evaluate_corpus(pairs, scale, scale, metrics);
}

}  // namespace lapsr
