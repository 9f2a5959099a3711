#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/augment.hpp"
#include "lapsr/imaging/corpus.hpp"
#include "lapsr/imaging/image.hpp"
#include "lapsr/imaging/png_io.hpp"
#include "lapsr/imaging/resize.hpp"
#include "lapsr/loss/loss.hpp"
#include "lapsr/rng.hpp"

namespace lapsr {

template <class T>
struct TrainingBatch {
  Tensor<T> lr;  // (N, C, patch / S, patch / S)
  PyramidTarget<T> targets;
};

// Builds the ground-truth pyramid for one HR patch: level s is the patch
// bicubic-downsampled to patch / 2^(L - s); the top level is the patch itself.
// The LR input is the patch downsampled by the full scale. All clamped to [0, 1].
inline std::pair<Image, std::vector<Image>> pyramid_from_patch(const Image& patch, std::uint32_t scale) {
  const auto levels = static_cast<std::uint32_t>(std::countr_zero(scale));
  std::vector<Image> targets;
  for (std::uint32_t s = 1; s <= levels; ++s) {
    const std::size_t div = std::size_t{1} << (levels - s);
    targets.push_back(s == levels ? patch : bicubic_resize(patch, patch.width / div, patch.height / div).clamp());
  }
  Image lr = bicubic_resize(patch, patch.width / scale, patch.height / scale).clamp();
  return {std::move(lr), std::move(targets)};
}

// Draws augmented HR patches from a fixed image set. Draw order per sample:
// image, scale factor, rotation, flip, crop row, crop column. A batch drawn
// with a given seed is independent of every earlier call.
class BatchSampler {
 public:
  using Warn = std::function<void(const std::string&)>;

  BatchSampler(std::vector<Image> images, AugmentSpec augment, std::uint32_t scale, std::size_t patch,
               const Warn& warn = {})
      : images_(std::move(images)), augment_(std::move(augment)), scale_(scale), patch_(patch) {
    augment_.validate();
    if (scale < 2 || !std::has_single_bit(scale)) throw ConfigError("sampler scale must be a power of two >= 2");
    if (patch == 0 || patch % scale != 0)
      throw ConfigError("patch size " + std::to_string(patch) + " must be a positive multiple of scale " + std::to_string(scale));
    for (std::size_t i = 0; i < images_.size(); ++i) {
      std::vector<std::size_t> ok;
      for (std::size_t f = 0; f < augment_.scale_factors.size(); ++f) {
        const Image& scaled = scaled_image(i, f);
        if (scaled.width >= patch && scaled.height >= patch) {
          ok.push_back(f);
        } else if (warn) {
          warn("skipping image " + std::to_string(i) + " at scale factor " + std::to_string(augment_.scale_factors[f]) +
               ": " + std::to_string(scaled.width) + "x" + std::to_string(scaled.height) + " is smaller than the " +
               std::to_string(patch) + " px patch");
        }
      }
      if (!ok.empty()) eligible_.emplace_back(i, std::move(ok));
    }
    if (eligible_.empty()) throw ConfigError("no training image is large enough for a " + std::to_string(patch) + " px patch");
  }

  // One augmented HR patch.
  Image draw_patch(Rng& rng) {
    const auto& [image, factors] = eligible_[rng.below(eligible_.size())];
    const std::size_t factor = factors[rng.below(factors.size())];
    const int rotation = augment_.rotations[rng.below(augment_.rotations.size())];
    const Flip flip = augment_.flips[rng.below(augment_.flips.size())];
    const Image view = apply_flip(rotate90k(scaled_image(image, factor), rotation / 90), flip);
    const std::size_t top = rng.below(view.height - patch_ + 1);
    const std::size_t left = rng.below(view.width - patch_ + 1);
    Image patch(patch_, patch_, view.channels);
    for (std::size_t y = 0; y < patch_; ++y)
      for (std::size_t x = 0; x < patch_; ++x)
        for (std::size_t c = 0; c < view.channels; ++c) patch.at(x, y, c) = view.at(left + x, top + y, c);
    return patch;
  }

  template <class T>
  TrainingBatch<T> sample(std::size_t batch, std::uint64_t seed) {
    if (batch == 0) throw ConfigError("batch size must be >= 1");
    Rng rng(seed);
    const auto levels = static_cast<std::size_t>(std::countr_zero(scale_));
    std::vector<Image> lrs;
    std::vector<std::vector<Image>> per_level(levels);
    for (std::size_t n = 0; n < batch; ++n) {
      auto [lr, targets] = pyramid_from_patch(draw_patch(rng), scale_);
      lrs.push_back(std::move(lr));
      for (std::size_t s = 0; s < levels; ++s) per_level[s].push_back(std::move(targets[s]));
    }
    TrainingBatch<T> out{stack_images<T>(lrs), {}};
    for (const auto& level : per_level) out.targets.images.push_back(stack_images<T>(level));
    return out;
  }

  std::size_t eligible_images() const { return eligible_.size(); }

 private:
  const Image& scaled_image(std::size_t image, std::size_t factor) {
    auto key = std::make_pair(image, factor);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, scale_by(images_[image], augment_.scale_factors[factor]).clamp()).first;
    return it->second;
  }

  std::vector<Image> images_;
  AugmentSpec augment_;
  std::uint32_t scale_;
  std::size_t patch_;
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> eligible_;
  std::map<std::pair<std::size_t, std::size_t>, Image> cache_;
};

// Loads every train-split image of a manifest.
inline std::vector<Image> load_split(const CorpusManifest& manifest, Split split) {
  std::vector<Image> images;
  for (const auto& e : manifest.select(split)) images.push_back(load_image(manifest.resolve(e)));
  return images;
}

template <class T>
TrainingBatch<T> sample_training_batch(const CorpusManifest& manifest, const AugmentSpec& augment, std::uint32_t scale,
                                       std::size_t patch, std::size_t batch, std::uint64_t seed) {
  auto images = load_split(manifest, Split::kTrain);
  if (images.empty()) throw ConfigError("manifest has no train entries");
  BatchSampler sampler(std::move(images), augment, scale, patch);
  return sampler.sample<T>(batch, seed);
}

}  // namespace lapsr
