#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/image.hpp"

namespace lapsr {

// Keys cubic convolution kernel with a = -0.5.
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

namespace detail {

// Sparse resampling weights for one axis.
struct AxisWeights {
  std::size_t taps = 0;
  std::vector<std::size_t> index;  // out_len * taps, clamped source indices
  std::vector<double> weight;      // out_len * taps, normalized per output
};

// Pixel centers map as (i + 0.5) / scale - 0.5. On downscaling the kernel is
// stretched by 1 / scale, which low-passes the source before decimation.
inline AxisWeights axis_weights(std::size_t in_len, std::size_t out_len) {
  const double scale = static_cast<double>(out_len) / static_cast<double>(in_len);
  const double stretch = scale < 1.0 ? scale : 1.0;
  const double support = 4.0 / stretch;
  AxisWeights aw;
  aw.taps = static_cast<std::size_t>(std::ceil(support)) + 2;
  aw.index.resize(out_len * aw.taps);
  aw.weight.resize(out_len * aw.taps);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto left = static_cast<std::ptrdiff_t>(std::floor(u - support / 2.0));
    double sum = 0.0;
    for (std::size_t t = 0; t < aw.taps; ++t) {
      const std::ptrdiff_t j = left + static_cast<std::ptrdiff_t>(t);
      const double w = stretch * cubic_kernel(stretch * (u - static_cast<double>(j)));
      aw.index[i * aw.taps + t] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(in_len) - 1));
      aw.weight[i * aw.taps + t] = w;
      sum += w;
    }
    for (std::size_t t = 0; t < aw.taps; ++t) aw.weight[i * aw.taps + t] /= sum;
  }
  return aw;
}

}  // namespace detail

// Separable bicubic resize (horizontal pass, then vertical). Coordinates are
// clamped at the borders. Results are not clamped to the input range.
inline Image bicubic_resize(const Image& img, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw ShapeError("bicubic_resize: output dims must be >= 1");
  if (img.width == 0 || img.height == 0) throw ShapeError("bicubic_resize: empty input");
  const std::size_t ch = img.channels;
  const auto wx = detail::axis_weights(img.width, out_w);
  const auto wy = detail::axis_weights(img.height, out_h);

  Image tmp(out_w, img.height, ch);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < out_w; ++x)
      for (std::size_t c = 0; c < ch; ++c) {
        double s = 0.0;
        for (std::size_t t = 0; t < wx.taps; ++t) s += wx.weight[x * wx.taps + t] * img.at(wx.index[x * wx.taps + t], y, c);
        tmp.at(x, y, c) = s;
      }

  Image out(out_w, out_h, ch);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x)
      for (std::size_t c = 0; c < ch; ++c) {
        double s = 0.0;
        for (std::size_t t = 0; t < wy.taps; ++t) s += wy.weight[y * wy.taps + t] * tmp.at(x, wy.index[y * wy.taps + t], c);
        out.at(x, y, c) = s;
      }
  return out;
}

inline ImagePlane bicubic_resize(const ImagePlane& plane, std::size_t out_w, std::size_t out_h) {
  ImagePlane out;
  static_cast<Image&>(out) = bicubic_resize(static_cast<const Image&>(plane), out_w, out_h);
  out.range = plane.range;
  return out;
}

}  // namespace lapsr
