#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/tensor/tensor.hpp"

namespace lapsr {

// Interleaved multi-channel image with double samples. ImageRgb stores values
// in [0, 1]; intermediate resampling results may overshoot until clamp().
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, double fill = 0.0)
      : width(w), height(h), channels(c), data(w * h * c, fill) {}

  double& at(std::size_t x, std::size_t y, std::size_t c = 0) { return data[(y * width + x) * channels + c]; }
  double at(std::size_t x, std::size_t y, std::size_t c = 0) const { return data[(y * width + x) * channels + c]; }

  bool empty() const { return data.empty(); }
  bool same_dims(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  Image& clamp(double lo = 0.0, double hi = 1.0) {
    for (double& v : data) v = std::clamp(v, lo, hi);
    return *this;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

using ImageRgb = Image;

enum class PlaneRange { kUnit, k255 };

// Single-channel image tagged with the unit of its samples.
struct ImagePlane : Image {
  PlaneRange range = PlaneRange::k255;

  ImagePlane() = default;
  ImagePlane(std::size_t w, std::size_t h, PlaneRange r, double fill = 0.0) : Image(w, h, 1, fill), range(r) {}

  // Drops `border` pixels from each side.
  ImagePlane shaved(std::size_t border) const {
    if (2 * border >= width || 2 * border >= height)
      throw ShapeError("shave of " + std::to_string(border) + " px leaves an empty " + std::to_string(width) + "x" +
                       std::to_string(height) + " plane");
    ImagePlane out(width - 2 * border, height - 2 * border, range);
    for (std::size_t y = 0; y < out.height; ++y)
      for (std::size_t x = 0; x < out.width; ++x) out.at(x, y) = at(x + border, y + border);
    return out;
  }
};

inline Image make_rgb(std::size_t w, std::size_t h, double fill = 0.0) { return Image(w, h, 3, fill); }

// ITU-R BT.601 studio-swing luma on the 8-bit scale: [0,1] RGB -> [16, 235].
inline ImagePlane rgb_to_luminance(const Image& img) {
  if (img.channels != 3) throw ShapeError("rgb_to_luminance expects 3 channels");
  ImagePlane out(img.width, img.height, PlaneRange::k255);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      out.at(x, y) = 16.0 + 65.481 * img.at(x, y, 0) + 128.553 * img.at(x, y, 1) + 24.966 * img.at(x, y, 2);
  return out;
}

// (1, C, H, W) tensor from an interleaved image.
template <class T>
Tensor<T> to_tensor(const Image& img) {
  Tensor<T> t(Shape{1, img.channels, img.height, img.width});
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) t.at(0, c, y, x) = static_cast<T>(img.at(x, y, c));
  return t;
}

// Copies sample `n` of `batch` into an image without clamping.
template <class T>
Image from_tensor(const Tensor<T>& t, std::size_t n = 0) {
  const Shape& s = t.shape();
  if (n >= s.n) throw ShapeError("from_tensor: batch index out of range for " + s.str());
  Image img(s.w, s.h, s.c);
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) img.at(x, y, c) = static_cast<double>(t.at(n, c, y, x));
  return img;
}

// Stacks equally sized images into an (N, C, H, W) tensor.
template <class T>
Tensor<T> stack_images(const std::vector<Image>& images) {
  if (images.empty()) throw ShapeError("stack_images: no images");
  const Image& f = images.front();
  Tensor<T> t(Shape{images.size(), f.channels, f.height, f.width});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (!images[n].same_dims(f)) throw ShapeError("stack_images: images differ in size");
    for (std::size_t c = 0; c < f.channels; ++c)
      for (std::size_t y = 0; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) t.at(n, c, y, x) = static_cast<T>(images[n].at(x, y, c));
  }
  return t;
}

}  // namespace lapsr
