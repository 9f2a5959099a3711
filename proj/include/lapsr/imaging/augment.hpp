#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/image.hpp"
#include "lapsr/imaging/resize.hpp"

namespace lapsr {

enum class Flip { kNone, kHorizontal, kVertical };

struct AugmentSpec {
  std::vector<double> scale_factors{1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  std::vector<int> rotations{0, 90, 180, 270};
  std::vector<Flip> flips{Flip::kNone, Flip::kHorizontal, Flip::kVertical};

  static AugmentSpec identity() { return AugmentSpec{{1.0}, {0}, {Flip::kNone}}; }

  void validate() const {
    if (scale_factors.empty() || rotations.empty() || flips.empty())
      throw ConfigError("augmentation sets must be non-empty");
    for (double f : scale_factors)
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("augmentation scale factors must lie in (0, 1]");
    for (int r : rotations)
      if (r % 90 != 0 || r < 0 || r >= 360) throw ConfigError("rotations must be quarter turns in [0, 360)");
  }
};

// Mirrors left-right.
inline Image flip_h(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

// Mirrors top-bottom.
inline Image flip_v(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x, img.height - 1 - y, c);
  return out;
}

// k counter-clockwise quarter turns.
inline Image rotate90k(const Image& img, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return img;
  if (k == 2) return flip_h(flip_v(img));
  Image out(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(x, y, c) = k == 1 ? img.at(img.width - 1 - y, x, c) : img.at(y, img.height - 1 - x, c);
  return out;
}

// Bicubic rescale by f in (0, 1]; output dims are round(f * dims), min 1.
inline Image scale_by(const Image& img, double f) {
  if (!(f > 0.0 && f <= 1.0)) throw ConfigError("scale_by: factor must lie in (0, 1]");
  if (f == 1.0) return img;
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(f * static_cast<double>(img.width))));
  const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(f * static_cast<double>(img.height))));
  return bicubic_resize(img, w, h);
}

inline Image apply_flip(const Image& img, Flip f) {
  switch (f) {
    case Flip::kHorizontal: return flip_h(img);
    case Flip::kVertical: return flip_v(img);
    case Flip::kNone: break;
  }
  return img;
}

inline std::string to_string(Flip f) {
  switch (f) {
    case Flip::kHorizontal: return "h";
    case Flip::kVertical: return "v";
    case Flip::kNone: break;
  }
  return "none";
}

inline Flip parse_flip(const std::string& s) {
  if (s == "none") return Flip::kNone;
  if (s == "h") return Flip::kHorizontal;
  if (s == "v") return Flip::kVertical;
  throw ConfigError("unknown flip '" + s + "' (expected none, h or v)");
}

}  // namespace lapsr
