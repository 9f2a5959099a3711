#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/tensor/gemm.hpp"
#include "lapsr/tensor/tensor.hpp"

namespace lapsr {

namespace kernels {

// Unfolds one (C, H, W) image into a (C*kh*kw, oh*ow) patch matrix.
template <class T>
void im2col(const T* src, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            T* col) {
  const auto ih_max = static_cast<std::ptrdiff_t>(h);
  const auto iw_max = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = src + c * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        T* row = col + ((c * kh + ky) * kw + kx) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          T* out = row + oy * ow;
          if (iy < 0 || iy >= ih_max) {
            for (std::size_t ox = 0; ox < ow; ++ox) out[ox] = T(0);
            continue;
          }
          const T* in = plane + iy * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            out[ox] = (ix < 0 || ix >= iw_max) ? T(0) : in[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds a patch matrix back into (C, H, W).
template <class T>
void col2im(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            T* dst) {
  const auto ih_max = static_cast<std::ptrdiff_t>(h);
  const auto iw_max = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = dst + c * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const T* row = col + ((c * kh + ky) * kw + kx) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= ih_max) continue;
          const T* in = row + oy * ow;
          T* out = plane + iy * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < iw_max) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace kernels

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return;
  throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                                const char* op, const char* dim) {
  if (in + 2 * pad < k)
    throw ShapeError(std::string(op) + ": kernel " + dim + " " + std::to_string(k) +
                     " exceeds padded input " + dim + " " + std::to_string(in + 2 * pad));
  return (in + 2 * pad - k) / stride + 1;
}

template <class T>
void check_bias(const Tensor<T>& bias, std::size_t channels, const char* op) {
  if (bias.numel() != channels)
    throw ShapeError(std::string(op) + ": bias has " + std::to_string(bias.numel()) +
                     " elements, expected out_channels = " + std::to_string(channels));
}

// Accumulation type for reductions.
template <class T>
using acc_t = double;

// Neumaier-compensated summation. The result is correctly rounded in almost
// every case, so n copies of v sum to fl(n * v).
struct CompensatedSum {
  double s = 0, c = 0;
  void add(double v) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

template <class T>
double compensated_sum(std::span<const T> xs) {
  CompensatedSum acc;
  for (T x : xs) acc.add(x);
  return acc.value();
}

}  // namespace detail

// 2-D cross-correlation with zero padding. weight: (out_ch, in_ch, kh, kw),
// bias: out_ch elements.
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  if (is.c != ws.c)
    throw ShapeError("conv2d: input channels " + std::to_string(is.c) +
                     " != weight in_channels " + std::to_string(ws.c));
  detail::check_bias(bias, ws.n, "conv2d");
  const std::size_t oh = detail::conv_out_dim(is.h, ws.h, stride, padding, "conv2d", "height");
  const std::size_t ow = detail::conv_out_dim(is.w, ws.w, stride, padding, "conv2d", "width");
  const std::size_t oc = ws.n, kdim = ws.c * ws.h * ws.w, opix = oh * ow;

  Tensor<T> out(Shape{is.n, oc, oh, ow});
  std::vector<T> col(kdim * opix);
  const T* x = input.data().data();
  const T* wt = weight.data().data();
  const T* b = bias.data().data();
  T* y = out.data().data();
  for (std::size_t n = 0; n < is.n; ++n) {
    T* yn = y + n * oc * opix;
    for (std::size_t o = 0; o < oc; ++o)
      for (std::size_t p = 0; p < opix; ++p) yn[o * opix + p] = b[o];
    kernels::im2col(x + n * is.c * is.plane(), is.c, is.h, is.w, ws.h, ws.w, stride, padding, oh, ow,
                    col.data());
    kernels::gemm(kernels::Trans::kNo, kernels::Trans::kNo, oc, opix, kdim, wt, kdim, col.data(),
                  opix, yn, opix);
  }

  detail::record<T>(out, "conv2d", {input, weight, bias},
                    [input, weight, bias, stride, padding, oh, ow](std::span<const T> gy) {
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    const std::size_t oc = ws.n, kdim = ws.c * ws.h * ws.w, opix = oh * ow;
    T* gx = detail::grad_target(input);
    T* gw = detail::grad_target(weight);
    T* gb = detail::grad_target(bias);
    std::vector<T> col(kdim * opix);
    for (std::size_t n = 0; n < is.n; ++n) {
      const T* gyn = gy.data() + n * oc * opix;
      if (gb) {
        for (std::size_t o = 0; o < oc; ++o) {
          detail::acc_t<T> s = 0;
          for (std::size_t p = 0; p < opix; ++p) s += gyn[o * opix + p];
          gb[o] += static_cast<T>(s);
        }
      }
      if (gw) {
        kernels::im2col(input.data().data() + n * is.c * is.plane(), is.c, is.h, is.w, ws.h, ws.w,
                        stride, padding, oh, ow, col.data());
        kernels::gemm(kernels::Trans::kNo, kernels::Trans::kYes, oc, kdim, opix, gyn, opix,
                      col.data(), opix, gw, kdim);
      }
      if (gx) {
        std::fill(col.begin(), col.end(), T(0));
        kernels::gemm(kernels::Trans::kYes, kernels::Trans::kNo, kdim, opix, oc,
                      weight.data().data(), kdim, gyn, opix, col.data(), opix);
        kernels::col2im(col.data(), is.c, is.h, is.w, ws.h, ws.w, stride, padding, oh, ow,
                        gx + n * is.c * is.plane());
      }
    }
  });
  return out;
}

// Transposed convolution, the adjoint of conv2d with the same weight layout
// read as (in_ch, out_ch, kh, kw). Output dims: (H - 1) * stride - 2 * padding + k.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride = 2, std::size_t padding = 1) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (stride == 0) throw ShapeError("conv_transpose2d: stride must be >= 1");
  if (is.c != ws.n)
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(is.c) +
                     " != weight in_channels " + std::to_string(ws.n));
  detail::check_bias(bias, ws.c, "conv_transpose2d");
  if (is.h == 0 || is.w == 0 || (is.h - 1) * stride + ws.h < 2 * padding + 1 ||
      (is.w - 1) * stride + ws.w < 2 * padding + 1)
    throw ShapeError("conv_transpose2d: padding " + std::to_string(padding) +
                     " leaves an empty output for input " + is.str());
  const std::size_t oh = (is.h - 1) * stride + ws.h - 2 * padding;
  const std::size_t ow = (is.w - 1) * stride + ws.w - 2 * padding;
  const std::size_t oc = ws.c, kdim = ws.c * ws.h * ws.w, ipix = is.plane(), opix = oh * ow;

  Tensor<T> out(Shape{is.n, oc, oh, ow});
  std::vector<T> col(kdim * ipix);
  const T* b = bias.data().data();
  T* y = out.data().data();
  for (std::size_t n = 0; n < is.n; ++n) {
    T* yn = y + n * oc * opix;
    std::fill(col.begin(), col.end(), T(0));
    kernels::gemm(kernels::Trans::kYes, kernels::Trans::kNo, kdim, ipix, is.c,
                  weight.data().data(), kdim, input.data().data() + n * is.c * ipix, ipix,
                  col.data(), ipix);
    for (std::size_t o = 0; o < oc; ++o)
      for (std::size_t p = 0; p < opix; ++p) yn[o * opix + p] = b[o];
    kernels::col2im(col.data(), oc, oh, ow, ws.h, ws.w, stride, padding, is.h, is.w, yn);
  }

  detail::record<T>(out, "conv_transpose2d", {input, weight, bias},
                    [input, weight, bias, stride, padding, oh, ow](std::span<const T> gy) {
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    const std::size_t oc = ws.c, kdim = ws.c * ws.h * ws.w, ipix = is.plane(), opix = oh * ow;
    T* gx = detail::grad_target(input);
    T* gw = detail::grad_target(weight);
    T* gb = detail::grad_target(bias);
    std::vector<T> col(kdim * ipix);
    for (std::size_t n = 0; n < is.n; ++n) {
      const T* gyn = gy.data() + n * oc * opix;
      if (gb) {
        for (std::size_t o = 0; o < oc; ++o) {
          detail::acc_t<T> s = 0;
          for (std::size_t p = 0; p < opix; ++p) s += gyn[o * opix + p];
          gb[o] += static_cast<T>(s);
        }
      }
      if (!gx && !gw) continue;
      kernels::im2col(gyn, oc, oh, ow, ws.h, ws.w, stride, padding, is.h, is.w, col.data());
      if (gx)
        kernels::gemm(kernels::Trans::kNo, kernels::Trans::kNo, is.c, ipix, kdim,
                      weight.data().data(), kdim, col.data(), ipix, gx + n * is.c * ipix, ipix);
      if (gw)
        kernels::gemm(kernels::Trans::kNo, kernels::Trans::kYes, is.c, kdim, ipix,
                      input.data().data() + n * is.c * ipix, ipix, col.data(), ipix, gw, kdim);
    }
  });
  return out;
}

// x if x >= 0 else slope * x. The derivative at exactly 0 is taken as 1.
template <class T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope) {
  if (!(slope > T(0) && slope < T(1))) throw ConfigError("leaky_relu: slope must lie in (0, 1)");
  Tensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
  detail::record<T>(out, "leaky_relu", {input}, [input, slope](std::span<const T> gy) {
    T* gx = detail::grad_target(input);
    auto x = input.data();
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += x[i] >= T(0) ? gy[i] : slope * gy[i];
  });
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  detail::record<T>(out, "add", {a, b}, [a, b](std::span<const T> gy) {
    if (T* ga = detail::grad_target(a))
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    if (T* gb = detail::grad_target(b))
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
  });
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] - b.data()[i];
  detail::record<T>(out, "sub", {a, b}, [a, b](std::span<const T> gy) {
    if (T* ga = detail::grad_target(a))
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    if (T* gb = detail::grad_target(b))
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
  });
  return out;
}

template <class T>
Tensor<T> scalar_mul(const Tensor<T>& a, T k) {
  Tensor<T> out(a.shape());
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = k * a.data()[i];
  detail::record<T>(out, "scalar_mul", {a}, [a, k](std::span<const T> gy) {
    T* ga = detail::grad_target(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += k * gy[i];
  });
  return out;
}

// |a - b|; the derivative where a == b is taken as 0.
template <class T>
Tensor<T> abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "abs_diff");
  Tensor<T> out(a.shape());
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::abs(a.data()[i] - b.data()[i]);
  detail::record<T>(out, "abs_diff", {a, b}, [a, b](std::span<const T> gy) {
    T* ga = detail::grad_target(a);
    T* gb = detail::grad_target(b);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      const T d = a.data()[i] - b.data()[i];
      const T s = d > T(0) ? gy[i] : (d < T(0) ? -gy[i] : T(0));
      if (ga) ga[i] += s;
      if (gb) gb[i] -= s;
    }
  });
  return out;
}

// Elementwise sqrt(x^2 + eps^2).
template <class T>
Tensor<T> charbonnier_map(const Tensor<T>& a, T eps) {
  if (!(eps > T(0))) throw ConfigError("charbonnier_map: epsilon must be > 0");
  const T eps2 = eps * eps;
  Tensor<T> out(a.shape());
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sqrt(a.data()[i] * a.data()[i] + eps2);
  detail::record<T>(out, "charbonnier_map", {a}, [a, eps2](std::span<const T> gy) {
    T* ga = detail::grad_target(a);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      const T x = a.data()[i];
      ga[i] += gy[i] * x / std::sqrt(x * x + eps2);
    }
  });
  return out;
}

// Sum of all elements, compensated in double in row-major order.
template <class T>
Tensor<T> reduce_sum(const Tensor<T>& a) {
  const double s = detail::compensated_sum<T>(a.data());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
  detail::record<T>(out, "reduce_sum", {a}, [a](std::span<const T> gy) {
    T* ga = detail::grad_target(a);
    for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += gy[0];
  });
  return out;
}

// Sum of every element of every part as a single rounded reduction.
template <class T>
Tensor<T> reduce_sum(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("reduce_sum: no tensors");
  detail::CompensatedSum acc;
  for (const auto& p : parts)
    for (T v : p.data()) acc.add(v);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc.value()));
  detail::record<T>(out, "reduce_sum", parts, [parts](std::span<const T> gy) {
    for (const auto& p : parts)
      if (T* g = detail::grad_target(p))
        for (std::size_t i = 0; i < p.numel(); ++i) g[i] += gy[0];
  });
  return out;
}

template <class T>
Tensor<T> reduce_mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("reduce_mean: empty tensor");
  const double s = detail::compensated_sum<T>(a.data());
  const auto count = static_cast<detail::acc_t<T>>(a.numel());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / count));
  detail::record<T>(out, "reduce_mean", {a}, [a](std::span<const T> gy) {
    T* ga = detail::grad_target(a);
    const T g = static_cast<T>(gy[0] / static_cast<detail::acc_t<T>>(a.numel()));
    for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g;
  });
  return out;
}

// Sum of a * b over all elements.
template <class T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "dot");
  detail::acc_t<T> s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.data()[i] * b.data()[i];
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
  detail::record<T>(out, "dot", {a, b}, [a, b](std::span<const T> gy) {
    if (T* ga = detail::grad_target(a))
      for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += gy[0] * b.data()[i];
    if (T* gb = detail::grad_target(b))
      for (std::size_t i = 0; i < b.numel(); ++i) gb[i] += gy[0] * a.data()[i];
  });
  return out;
}

// Spatial window [top, top + height) x [left, left + width) of every plane.
template <class T>
Tensor<T> crop(const Tensor<T>& a, std::size_t top, std::size_t left, std::size_t height,
               std::size_t width) {
  const Shape& s = a.shape();
  if (top + height > s.h || left + width > s.w)
    throw ShapeError("crop: window exceeds input " + s.str());
  Tensor<T> out(Shape{s.n, s.c, height, width});
  auto y = out.data();
  const std::size_t planes = s.n * s.c;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t q = 0; q < width; ++q)
        y[(p * height + r) * width + q] = a.data()[(p * s.h + top + r) * s.w + left + q];
  detail::record<T>(out, "crop", {a}, [a, top, left, height, width](std::span<const T> gy) {
    const Shape& s = a.shape();
    T* ga = detail::grad_target(a);
    const std::size_t planes = s.n * s.c;
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t q = 0; q < width; ++q)
          ga[(p * s.h + top + r) * s.w + left + q] += gy[(p * height + r) * width + q];
  });
  return out;
}

// Batch element `index` as a (1, C, H, W) tensor.
template <class T>
Tensor<T> select_batch(const Tensor<T>& a, std::size_t index) {
  const Shape& s = a.shape();
  if (index >= s.n) throw ShapeError("select_batch: index out of range for " + s.str());
  const std::size_t len = s.c * s.plane();
  Tensor<T> out(Shape{1, s.c, s.h, s.w});
  std::copy_n(a.data().begin() + index * len, len, out.data().begin());
  detail::record<T>(out, "select_batch", {a}, [a, index, len](std::span<const T> gy) {
    T* ga = detail::grad_target(a) + index * len;
    for (std::size_t i = 0; i < len; ++i) ga[i] += gy[i];
  });
  return out;
}

}  // namespace lapsr
