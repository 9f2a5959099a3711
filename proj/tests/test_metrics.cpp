#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lapsr/metrics/metrics.hpp"
#include "lapsr/metrics/report.hpp"
#include "lapsr/rng.hpp"

using namespace lapsr;

namespace {

ImagePlane textured(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  ImagePlane p(w, h, PlaneRange::k255);
  const double fx = 0.2 + 0.3 * rng.uniform(), fy = 0.1 + 0.3 * rng.uniform();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      p.at(x, y) = 128 + 60 * std::sin(fx * static_cast<double>(x)) * std::cos(fy * static_cast<double>(y)) +
                   30 * (rng.uniform() - 0.5) + ((x / 6 + y / 6) % 2 ? 25 : -25);
  return p;
}

ImagePlane offset(const ImagePlane& p, double d) {
  ImagePlane q = p;
  for (double& v : q.data) v += d;
  return q;
}

ImagePlane noisy(const ImagePlane& p, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  ImagePlane q = p;
  for (double& v : q.data) v += sigma * rng.normal();
  return q;
}

// Windowed SSIM evaluated window by window with explicit 2-D Gaussian weights.
double ssim_oracle(const ImagePlane& a, const ImagePlane& b) {
  const double c1 = 6.5025, c2 = 58.5225;
  std::vector<double> g(11);
  double gs = 0;
  for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
  double total = 0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + 11 <= a.height; ++y)
    for (std::size_t x = 0; x + 11 <= a.width; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i] * g[j] / (gs * gs), va = a.at(x + j, y + i), vb = b.at(x + j, y + i);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace

TEST(Psnr, UniformOffsets) {
  const ImagePlane ref = textured(32, 24, 1);
  EXPECT_NEAR(psnr(ref, offset(ref, 1)), 20 * std::log10(255.0), 1e-9);
  EXPECT_NEAR(psnr(ref, offset(ref, 1)), 48.1308, 1e-3);
  EXPECT_NEAR(psnr(ref, offset(ref, 16)), 20 * std::log10(255.0 / 16), 1e-9);
  EXPECT_NEAR(psnr(ref, offset(ref, 16)), 24.0494, 1e-3);
}

TEST(Psnr, IdenticalIsInfinite) {
  const ImagePlane ref = textured(16, 16, 2);
  EXPECT_EQ(psnr(ref, ref), std::numeric_limits<double>::infinity());
}

TEST(Psnr, SymmetricAndMonotone) {
  const ImagePlane a = textured(20, 20, 3), b = noisy(a, 5, 4);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  double last = std::numeric_limits<double>::infinity();
  for (double d : {0.5, 1.0, 2.0, 8.0, 40.0}) {
    const double p = psnr(a, offset(a, d));
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(ImagePlane(4, 4, PlaneRange::k255), ImagePlane(4, 5, PlaneRange::k255)), ShapeError);
  EXPECT_THROW(psnr(ImagePlane(4, 4, PlaneRange::kUnit), ImagePlane(4, 4, PlaneRange::kUnit)), ConfigError);
}

TEST(Ssim, IdenticalIsExactlyOne) {
  for (std::uint64_t seed : {5, 6, 7}) {
    const ImagePlane a = textured(23, 31, seed);
    EXPECT_EQ(ssim(a, a), 1.0);
  }
  const ImagePlane flat(12, 12, PlaneRange::k255, 77);
  EXPECT_EQ(ssim(flat, flat), 1.0);
}

TEST(Ssim, ConstantPairClosedForm) {
  const ImagePlane a(16, 16, PlaneRange::k255, 100), b(16, 16, PlaneRange::k255, 110);
  const double c1 = SsimConfig{}.c1;
  const double closed = (2 * 100 * 110 + c1) / (100.0 * 100 + 110.0 * 110 + c1);
  EXPECT_NEAR(ssim(a, b), closed, 1e-12);
  EXPECT_NEAR(closed, 0.99548, 1e-5);
}

TEST(Ssim, MatchesWindowOracle) {
  const ImagePlane a = textured(24, 19, 8), b = noisy(a, 12, 9);
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-10);
}

TEST(Ssim, Symmetric) {
  const ImagePlane a = textured(30, 30, 10), b = noisy(a, 20, 11);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, AnticorrelatedIsLow) {
  const ImagePlane a = textured(40, 40, 12);
  ImagePlane inv = a;
  for (double& v : inv.data) v = 255 - v;
  EXPECT_LT(ssim(a, inv), 0.5);
}

TEST(Ssim, ProductOfDeviationsIgnoresSign) {
  const ImagePlane a = textured(40, 40, 13);
  ImagePlane inv = a;
  for (double& v : inv.data) v = 255 - v;
  SsimConfig printed;
  printed.product_of_deviations = true;
  EXPECT_GT(ssim(a, inv, printed), ssim(a, inv));
}

TEST(Ssim, WindowTapsSumToOne) {
  double s = 0;
  const auto g = gaussian_taps(11, 1.5);
  for (double a : g)
    for (double b : g) s += a * b;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Ssim, TooSmallIsError) {
  EXPECT_THROW(ssim(ImagePlane(10, 20, PlaneRange::k255), ImagePlane(10, 20, PlaneRange::k255)), ShapeError);
}

TEST(Ifc, DecreasesWithNoise) {
  const ImagePlane ref = textured(96, 96, 14);
  const double i2 = ifc(ref, noisy(ref, 2, 15)), i8 = ifc(ref, noisy(ref, 8, 15)), i32 = ifc(ref, noisy(ref, 32, 15));
  EXPECT_GT(i2, i8);
  EXPECT_GT(i8, i32);
  EXPECT_GT(i32, 0.0);
}

TEST(Ifc, IdenticalIsLargeAndFinite) {
  const ImagePlane ref = textured(64, 64, 16);
  const double self = ifc(ref, ref);
  EXPECT_TRUE(std::isfinite(self));
  EXPECT_GT(self, ifc(ref, noisy(ref, 2, 17)));
}

TEST(Ifc, ConstantTestCarriesNoInformation) {
  const ImagePlane ref = textured(64, 64, 18);
  const ImagePlane flat(64, 64, PlaneRange::k255, 128);
  EXPECT_NEAR(ifc(ref, flat), 0.0, 1e-6);
}

TEST(Ifc, Errors) {
  EXPECT_THROW(ifc(ImagePlane(8, 8, PlaneRange::k255), ImagePlane(8, 8, PlaneRange::k255)), ShapeError);
  EXPECT_THROW(ifc(ImagePlane(64, 64, PlaneRange::k255), ImagePlane(64, 32, PlaneRange::k255)), ShapeError);
}

namespace {

Image rgb_from(const ImagePlane& lum) {
  // Grey image whose luminance is `lum` (inverse of the BT.601 mapping on R = G = B).
  Image img = make_rgb(lum.width, lum.height);
  for (std::size_t i = 0; i < lum.data.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) img.data[i * 3 + c] = (lum.data[i] - 16.0) / 219.0;
  return img;
}

}  // namespace

TEST(Report, IdenticalPairs) {
  const Image img = rgb_from(textured(40, 40, 19));
  const auto r = evaluate_corpus({{"a.png", img, img, ""}, {"b.png", img, img, ""}}, 2, 2);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].psnr, std::numeric_limits<double>::infinity());
  EXPECT_EQ(r.rows[0].ssim, 1.0);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_EQ(r.shave, 2u);
}

TEST(Report, MeansAreRowAverages) {
  const ImagePlane base = textured(48, 48, 20);
  const Image ref = rgb_from(base);
  const Image a = rgb_from(noisy(base, 4, 21)), b = rgb_from(noisy(base, 16, 22));
  const auto r = evaluate_corpus({{"a", ref, a, ""}, {"b", ref, b, ""}}, 4, 4);
  EXPECT_NEAR(r.mean_psnr, (r.rows[0].psnr + r.rows[1].psnr) / 2, 1e-12);
  EXPECT_NEAR(r.mean_ssim, (r.rows[0].ssim + r.rows[1].ssim) / 2, 1e-12);
  EXPECT_NEAR(r.mean_ifc, (r.rows[0].ifc + r.rows[1].ifc) / 2, 1e-12);
  EXPECT_GT(r.rows[0].psnr, r.rows[1].psnr);
}

TEST(Report, ShaveIsApplied) {
  const ImagePlane base = textured(48, 48, 23);
  const Image ref = rgb_from(base);
  Image sr = ref;
  for (std::size_t x = 0; x < 48; ++x) sr.at(x, 0, 0) = sr.at(x, 0, 1) = sr.at(x, 0, 2) = 1.0;  // damage the top row only
  EXPECT_LT(evaluate_corpus({{"a", ref, sr, ""}}, 2, 0).rows[0].psnr, 1e300);
  EXPECT_EQ(evaluate_corpus({{"a", ref, sr, ""}}, 2, 2).rows[0].psnr, std::numeric_limits<double>::infinity());
}

TEST(Report, FailedPairsBecomeErrorRows) {
  const Image img = rgb_from(textured(40, 40, 24));
  const auto r = evaluate_corpus(
      {{"ok", img, img, ""}, {"missing", img, std::nullopt, "model crashed"}, {"dims", img, make_rgb(20, 20), ""}}, 2, 2);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.failures, 2u);
  EXPECT_EQ(r.rows[1].error, "model crashed");
  EXPECT_NE(r.rows[2].error.find("dimension mismatch"), std::string::npos);
  EXPECT_EQ(r.mean_ssim, 1.0);
}

TEST(Report, CsvAndJson) {
  const Image img = rgb_from(textured(40, 40, 25));
  const auto r = evaluate_corpus({{"x.png", img, img, ""}}, 2, 2);
  const std::string csv = report_csv(r);
  std::istringstream in(csv);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "path,scale,psnr,ssim,ifc");
  EXPECT_EQ(row.rfind("x.png,2,inf,1,", 0), 0u) << row;
  EXPECT_FALSE(std::getline(in, extra));
  const auto j = report_json(r);
  EXPECT_EQ(j["mean"]["psnr"], "inf");
  EXPECT_EQ(j["count"], 1);
}

TEST(Report, MetricFormatting) {
  EXPECT_EQ(format_metric(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_metric(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_metric(std::nan("")), "nan");
  EXPECT_EQ(format_metric(0.1), "0.1");
  EXPECT_EQ(std::stod(format_metric(1.0 / 3)), 1.0 / 3);
}
