#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/rng.hpp"
#include "lapsr/tensor/tensor.hpp"

namespace lapsr {

// Zero-mean Gaussian with std sqrt(2 / fan_in), fan_in = in_ch * kh * kw taken
// from a conv weight shape (out_ch, in_ch, kh, kw).
template <class T>
Tensor<T> init_he_gaussian(Shape shape, std::uint64_t seed) {
  const std::size_t fan_in = shape.c * shape.h * shape.w;
  if (fan_in == 0) throw ConfigError("init_he_gaussian: zero fan-in for shape " + shape.str());
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  Rng rng(seed);
  Tensor<T> out(shape);
  for (T& v : out.data()) v = static_cast<T>(stddev * rng.normal());
  return out;
}

// 1-D bilinear upsampling taps, e.g. [0.25, 0.75, 0.75, 0.25] for size 4.
inline std::vector<double> bilinear_taps(std::size_t size) {
  if (size == 0 || size % 2 != 0) throw ConfigError("bilinear kernel size must be even and positive");
  const double factor = static_cast<double>((size + 1) / 2);
  const double center = factor - 0.5;
  std::vector<double> k(size);
  for (std::size_t i = 0; i < size; ++i)
    k[i] = 1.0 - std::abs(static_cast<double>(i) - center) / factor;
  return k;
}

// (1, 1, size, size) outer product of bilinear_taps with itself.
template <class T>
Tensor<T> init_bilinear(std::size_t size) {
  const auto k = bilinear_taps(size);
  Tensor<T> out(Shape{1, 1, size, size});
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) out.at(0, 0, i, j) = static_cast<T>(k[i] * k[j]);
  return out;
}

// Transposed-conv weight (ch, ch, size, size) that upsamples each channel
// independently with the bilinear kernel.
template <class T>
Tensor<T> init_bilinear_upsampler(std::size_t channels, std::size_t size) {
  const Tensor<T> kernel = init_bilinear<T>(size);
  Tensor<T> out(Shape{channels, channels, size, size});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) out.at(c, c, i, j) = kernel.at(0, 0, i, j);
  return out;
}

}  // namespace lapsr
