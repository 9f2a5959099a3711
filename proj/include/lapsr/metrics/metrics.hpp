#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/image.hpp"

namespace lapsr {

namespace detail {

inline void require_same_dims(const ImagePlane& a, const ImagePlane& b, const char* metric) {
  if (a.width != b.width || a.height != b.height)
    throw ShapeError(std::string(metric) + ": dimension mismatch " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

inline void require_255(const ImagePlane& p, const char* metric) {
  if (p.range != PlaneRange::k255) throw ConfigError(std::string(metric) + " expects planes on the [0, 255] scale");
}

}  // namespace detail

inline double mse(const ImagePlane& ref, const ImagePlane& test) {
  detail::require_same_dims(ref, test, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double d = test.data[i] - ref.data[i];
    s += d * d;
  }
  return s / static_cast<double>(ref.data.size());
}

// 10 log10(255^2 / MSE) in dB; +infinity when the planes are identical.
inline double psnr(const ImagePlane& ref, const ImagePlane& test) {
  detail::require_255(ref, "psnr");
  detail::require_255(test, "psnr");
  const double m = mse(ref, test);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

struct SsimConfig {
  double c1 = (0.01 * 255) * (0.01 * 255);
  double c2 = (0.03 * 255) * (0.03 * 255);
  std::size_t window = 11;
  double sigma = 1.5;
  // Uses 2 * sigma_x * sigma_y in place of the cross-covariance term.
  bool product_of_deviations = false;
};

// Normalized 1-D Gaussian taps; their outer product is the 2-D window.
inline std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  std::vector<double> k(size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace detail {

// Valid-region separable filtering of a plane with `taps`.
inline std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                        const std::vector<double>& taps) {
  const std::size_t k = taps.size(), ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(ow * h), out(ow * oh);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * src[y * w + x + t];
      tmp[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * tmp[(y + t) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace detail

// Mean structural similarity over all fully contained Gaussian windows.
inline double ssim(const ImagePlane& ref, const ImagePlane& test, const SsimConfig& cfg = {}) {
  detail::require_same_dims(ref, test, "ssim");
  if (!(cfg.c1 > 0 && cfg.c2 > 0)) throw ConfigError("ssim constants must be > 0");
  if (ref.width < cfg.window || ref.height < cfg.window)
    throw ShapeError("ssim: image " + std::to_string(ref.width) + "x" + std::to_string(ref.height) + " is smaller than the " +
                     std::to_string(cfg.window) + "x" + std::to_string(cfg.window) + " window");
  const auto taps = gaussian_taps(cfg.window, cfg.sigma);
  const std::size_t w = ref.width, h = ref.height;
  std::vector<double> xx(w * h), yy(w * h), xy(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    xx[i] = ref.data[i] * ref.data[i];
    yy[i] = test.data[i] * test.data[i];
    xy[i] = ref.data[i] * test.data[i];
  }
  const auto mu_x = detail::filter_valid(ref.data, w, h, taps);
  const auto mu_y = detail::filter_valid(test.data, w, h, taps);
  const auto e_xx = detail::filter_valid(xx, w, h, taps);
  const auto e_yy = detail::filter_valid(yy, w, h, taps);
  const auto e_xy = detail::filter_valid(xy, w, h, taps);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cov = cfg.product_of_deviations ? std::sqrt(std::max(vx, 0.0)) * std::sqrt(std::max(vy, 0.0))
                                                 : e_xy[i] - (mx * my);
    total += ((2.0 * (mx * my) + cfg.c1) * (2.0 * cov + cfg.c2)) / ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2));
  }
  return total / static_cast<double>(mu_x.size());
}

struct IfcConfig {
  std::size_t levels = 3;
  std::size_t window = 3;  // neighbourhood for the local variance field
  double sigma_n2 = 1e-10;
};

namespace detail {

struct Band {
  std::size_t width = 0, height = 0;
  std::vector<double> c;
};

// One level of the orthonormal 2-D Haar transform. Returns {LL, horizontal
// detail, vertical detail, diagonal detail}; inputs must have even dims.
inline std::array<Band, 4> haar_level(const Band& in) {
  const std::size_t w = in.width / 2, h = in.height / 2;
  std::array<Band, 4> out;
  for (auto& b : out) b = Band{w, h, std::vector<double>(w * h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double a = in.c[(2 * y) * in.width + 2 * x], b = in.c[(2 * y) * in.width + 2 * x + 1];
      const double c = in.c[(2 * y + 1) * in.width + 2 * x], d = in.c[(2 * y + 1) * in.width + 2 * x + 1];
      out[0].c[y * w + x] = (a + b + c + d) / 2.0;
      out[1].c[y * w + x] = (a + b - c - d) / 2.0;
      out[2].c[y * w + x] = (a - b + c - d) / 2.0;
      out[3].c[y * w + x] = (a - b - c + d) / 2.0;
    }
  return out;
}

// Detail subbands of a `levels`-deep Haar pyramid, lowpass residual excluded.
inline std::vector<Band> detail_bands(const ImagePlane& p, std::size_t levels) {
  const std::size_t unit = std::size_t{1} << levels;
  Band cur{p.width / unit * unit, p.height / unit * unit, {}};
  cur.c.resize(cur.width * cur.height);
  for (std::size_t y = 0; y < cur.height; ++y)
    for (std::size_t x = 0; x < cur.width; ++x) cur.c[y * cur.width + x] = p.at(x, y);
  std::vector<Band> bands;
  for (std::size_t l = 0; l < levels; ++l) {
    auto parts = haar_level(cur);
    for (std::size_t k = 1; k < 4; ++k) bands.push_back(std::move(parts[k]));
    cur = std::move(parts[0]);
  }
  return bands;
}

// Mean of squared coefficients over a clamped square neighbourhood.
inline std::vector<double> local_energy(const Band& b, std::size_t window) {
  const auto r = static_cast<std::ptrdiff_t>(window / 2);
  const auto w = static_cast<std::ptrdiff_t>(b.width), h = static_cast<std::ptrdiff_t>(b.height);
  std::vector<double> out(b.c.size());
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const double v = b.c[std::clamp(y + dy, std::ptrdiff_t{0}, h - 1) * w + std::clamp(x + dx, std::ptrdiff_t{0}, w - 1)];
          s += v * v;
        }
      out[y * w + x] = s / static_cast<double>((2 * r + 1) * (2 * r + 1));
    }
  return out;
}

}  // namespace detail

// Information fidelity criterion over a Haar detail pyramid. Reference
// coefficients follow a Gaussian scale mixture C = s * U whose variance field
// s^2 * var(U) is the local energy of the reference band; the test band is
// modelled as g * C + V with per-band least-squares g and var(V). The result
// sums 0.5 * log2(1 + g^2 s^2 var(U) / (var(V) + sigma_n^2)) over all
// detail coefficients.
inline double ifc(const ImagePlane& ref, const ImagePlane& test, const IfcConfig& cfg = {}) {
  detail::require_same_dims(ref, test, "ifc");
  if (cfg.levels < 1) throw ConfigError("ifc needs at least one pyramid level");
  if (!(cfg.sigma_n2 > 0)) throw ConfigError("ifc stabilizer must be > 0");
  if (cfg.window < 1 || cfg.window % 2 == 0) throw ConfigError("ifc window must be odd");
  const std::size_t min_dim = (std::size_t{1} << cfg.levels) * cfg.window;
  if (ref.width < min_dim || ref.height < min_dim)
    throw ShapeError("ifc: image " + std::to_string(ref.width) + "x" + std::to_string(ref.height) + " is too small for " +
                     std::to_string(cfg.levels) + " levels (need " + std::to_string(min_dim) + " px per side)");

  const auto ref_bands = detail::detail_bands(ref, cfg.levels);
  const auto test_bands = detail::detail_bands(test, cfg.levels);
  double info = 0.0;
  for (std::size_t k = 0; k < ref_bands.size(); ++k) {
    const auto& r = ref_bands[k].c;
    const auto& t = test_bands[k].c;
    double rr = 0.0, rt = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      rr += r[i] * r[i];
      rt += r[i] * t[i];
    }
    if (rr == 0.0) continue;  // flat reference band carries no information
    const double g = rt / rr;
    double resid = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double e = t[i] - g * r[i];
      resid += e * e;
    }
    const double sigma_v2 = resid / static_cast<double>(r.size());
    const auto energy = detail::local_energy(ref_bands[k], cfg.window);
    for (double s2u : energy) info += 0.5 * std::log2(1.0 + g * g * s2u / (sigma_v2 + cfg.sigma_n2));
  }
  return info;
}

}  // namespace lapsr
