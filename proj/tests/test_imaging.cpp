#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <png.h>

#include "lapsr/imaging/augment.hpp"
#include "lapsr/imaging/corpus.hpp"
#include "lapsr/imaging/image.hpp"
#include "lapsr/imaging/png_io.hpp"
#include "lapsr/imaging/resize.hpp"
#include "lapsr/imaging/sampler.hpp"

using namespace lapsr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("lapsr_imaging_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  Image img = make_rgb(w, h);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

Image bytes_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  Image img = make_rgb(w, h);
  for (double& v : img.data) v = static_cast<double>(rng.below(256)) / 255.0;
  return img;
}

double rmse(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return std::sqrt(s / static_cast<double>(a.data.size()));
}

Image nearest_resize(const Image& img, std::size_t w, std::size_t h) {
  Image out(w, h, img.channels);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(x * img.width / w, y * img.height / h, c);
  return out;
}

}  // namespace

TEST(Luminance, Bt601StudioSwing) {
  auto at = [](double r, double g, double b) {
    Image px = make_rgb(1, 1);
    px.data = {r, g, b};
    return rgb_to_luminance(px).at(0, 0);
  };
  EXPECT_NEAR(at(1, 1, 1), 235.0, 1e-12);
  EXPECT_EQ(at(0, 0, 0), 16.0);
  EXPECT_NEAR(at(0, 1, 0), 144.553, 1e-12);
  EXPECT_EQ(rgb_to_luminance(make_rgb(2, 2)).range, PlaneRange::k255);
  EXPECT_THROW(rgb_to_luminance(Image(2, 2, 1)), ShapeError);
}

TEST(Resize, ConstantsArePreserved) {
  const Image flat = make_rgb(13, 9, 0.3);
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{26, 18}, {6, 4}, {13, 9}, {7, 20}, {1, 1}}) {
    const Image out = bicubic_resize(flat, w, h);
    for (double v : out.data) ASSERT_NEAR(v, 0.3, 1e-12) << w << "x" << h;
  }
}

TEST(Resize, SameDimsIsIdentity) {
  const Image img = random_image(11, 7, 1);
  const Image out = bicubic_resize(img, 11, 7);
  for (std::size_t i = 0; i < img.data.size(); ++i) ASSERT_NEAR(out.data[i], img.data[i], 1e-9);
}

TEST(Resize, RampDownscaleMatchesDirectSummation) {
  Image ramp(8, 8, 1);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) ramp.at(x, y) = (static_cast<double>(x) + 2.0 * static_cast<double>(y)) / 21.0;
  const Image out = bicubic_resize(ramp, 4, 4);

  // Antialiased Keys kernel stretched by 2, evaluated over every source pixel
  // in a wide window with clamped coordinates and normalized in 2-D.
  auto k = [](double x) {
    x = std::abs(x);
    if (x <= 1) return 1.5 * x * x * x - 2.5 * x * x + 1;
    if (x < 2) return -0.5 * x * x * x + 2.5 * x * x - 4 * x + 2;
    return 0.0;
  };
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 4; ++ox) {
      const double cx = 2.0 * ox + 0.5, cy = 2.0 * oy + 0.5;
      double num = 0, den = 0;
      for (int jy = -8; jy < 16; ++jy)
        for (int jx = -8; jx < 16; ++jx) {
          const double w = k((cx - jx) / 2) * k((cy - jy) / 2);
          num += w * ramp.at(std::clamp(jx, 0, 7), std::clamp(jy, 0, 7));
          den += w;
        }
      EXPECT_NEAR(out.at(ox, oy), num / den, 1e-6) << ox << "," << oy;
    }
}

TEST(Resize, StaysWithinUndershootBounds) {
  const Image img = random_image(20, 20, 2);
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{40, 40}, {10, 10}, {33, 17}}) {
    const Image out = bicubic_resize(img, w, h);
    for (double v : out.data) {
      ASSERT_GE(v, -0.25);
      ASSERT_LE(v, 1.25);
    }
  }
}

TEST(Resize, RoundTripOfSmoothImageBeatsNearest) {
  Image img = make_rgb(64, 64);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(x, y, c) = 0.5 + 0.4 * std::sin(0.11 * static_cast<double>(x) + 0.07 * static_cast<double>(y) + static_cast<double>(c));
  const double cubic = rmse(img, bicubic_resize(bicubic_resize(img, 32, 32), 64, 64));
  const double nearest = rmse(img, nearest_resize(nearest_resize(img, 32, 32), 64, 64));
  EXPECT_LT(cubic, nearest);
}

TEST(Resize, RejectsEmptyOutput) {
  EXPECT_THROW(bicubic_resize(make_rgb(4, 4), 0, 4), ShapeError);
}

TEST(Augment, FlipsAreInvolutions) {
  const Image img = random_image(5, 3, 3);
  EXPECT_EQ(flip_h(flip_h(img)), img);
  EXPECT_EQ(flip_v(flip_v(img)), img);
  EXPECT_EQ(flip_h(img).at(0, 1, 2), img.at(4, 1, 2));
  EXPECT_EQ(flip_v(img).at(3, 0, 1), img.at(3, 2, 1));
}

TEST(Augment, QuarterTurnGroupLaws) {
  const Image img = random_image(5, 3, 4);
  EXPECT_EQ(rotate90k(rotate90k(rotate90k(rotate90k(img, 1), 1), 1), 1), img);
  EXPECT_EQ(rotate90k(img, 2), flip_h(flip_v(img)));
  EXPECT_EQ(rotate90k(img, 3), rotate90k(rotate90k(img, 2), 1));
  EXPECT_EQ(rotate90k(img, -1), rotate90k(img, 3));
  const Image r = rotate90k(img, 1);
  EXPECT_EQ(r.width, 3u);
  EXPECT_EQ(r.height, 5u);
}

TEST(Augment, ScaleByUsesBicubic) {
  const Image img = random_image(20, 10, 5);
  EXPECT_EQ(scale_by(img, 1.0), img);
  EXPECT_EQ(scale_by(img, 0.5), bicubic_resize(img, 10, 5));
  EXPECT_THROW(scale_by(img, 0.0), ConfigError);
  EXPECT_THROW(scale_by(img, 1.5), ConfigError);
}

TEST(Augment, SpecValidation) {
  EXPECT_NO_THROW(AugmentSpec{}.validate());
  EXPECT_THROW((AugmentSpec{{}, {0}, {Flip::kNone}}.validate()), ConfigError);
  EXPECT_THROW((AugmentSpec{{1.0}, {45}, {Flip::kNone}}.validate()), ConfigError);
  EXPECT_THROW((AugmentSpec{{1.2}, {0}, {Flip::kNone}}.validate()), ConfigError);
  EXPECT_EQ(parse_flip(to_string(Flip::kVertical)), Flip::kVertical);
  EXPECT_THROW(parse_flip("diagonal"), ConfigError);
}

TEST(Png, RoundTripIsBitExact) {
  const fs::path dir = scratch("png");
  const Image img = bytes_image(17, 9, 6);
  save_image(img, dir / "a.png");
  const Image back = load_image(dir / "a.png");
  EXPECT_EQ(back, img);
  save_image(back, dir / "b.png");
  std::ifstream a(dir / "a.png", std::ios::binary), b(dir / "b.png", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Png, ByteScaleAndRounding) {
  EXPECT_EQ(to_byte(1.0), 255);
  EXPECT_EQ(to_byte(0.0), 0);
  EXPECT_EQ(to_byte(1.7), 255);
  EXPECT_EQ(to_byte(-0.2), 0);
  EXPECT_EQ(to_byte(0.5 / 255.0), 1);  // half rounds up
  const fs::path dir = scratch("bytes");
  Image white = make_rgb(2, 2, 1.0);
  save_image(white, dir / "w.png");
  for (double v : load_image(dir / "w.png").data) EXPECT_EQ(v, 1.0);
}

TEST(Png, GrayscaleIsReplicated) {
  const fs::path dir = scratch("gray");
  Image g(3, 2, 1);
  g.data = {0, 51 / 255.0, 1, 0.2, 0.4, 0.6};
  for (double& v : g.data) v = std::round(v * 255) / 255;
  save_image(g, dir / "g.png");
  const Image rgb = load_image(dir / "g.png");
  ASSERT_EQ(rgb.channels, 3u);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(rgb.data[i * 3 + c], g.data[i]);
}

TEST(Png, SixteenBitIsRejected) {
  const fs::path dir = scratch("deep");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = 4;
  png.height = 4;
  png.format = PNG_FORMAT_LINEAR_Y;
  std::vector<png_uint_16> px(16, 40000);
  ASSERT_TRUE(png_image_write_to_file(&png, (dir / "deep.png").c_str(), 0, px.data(), 0, nullptr));
  try {
    load_image(dir / "deep.png");
    FAIL() << "16-bit PNG loaded";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported bit depth"), std::string::npos) << e.what();
  }
}

TEST(Png, MissingFileIsIoError) {
  EXPECT_THROW(load_image(scratch("none") / "nope.png"), IoError);
}

TEST(Corpus, CheckerboardValues) {
  const synth::Color a{1, 0, 0}, b{0, 0, 1};
  const Image img = synth::checkerboard(32, 16, 8, a, b);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 32; ++x) {
      const bool even = ((x / 8) + (y / 8)) % 2 == 0;
      ASSERT_EQ(img.at(x, y, 0), even ? 1.0 : 0.0);
      ASSERT_EQ(img.at(x, y, 2), even ? 0.0 : 1.0);
    }
  EXPECT_THROW(synth::checkerboard(4, 4, 0, a, b), ConfigError);
}

TEST(Corpus, SyntheticIsDeterministicWithRequestedSplit) {
  const auto m1 = generate_synthetic_corpus({}, scratch("c1"), 7);
  const auto m2 = generate_synthetic_corpus({}, scratch("c2"), 7);
  ASSERT_EQ(m1.entries.size(), 10u);
  EXPECT_EQ(m1.select(Split::kTrain).size(), 8u);
  EXPECT_EQ(m1.select(Split::kTest).size(), 2u);
  for (std::size_t i = 0; i < 10; ++i) {
    std::ifstream a(m1.resolve(m1.entries[i]), std::ios::binary), b(m2.resolve(m2.entries[i]), std::ios::binary);
    ASSERT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
  }
  const Image first = load_image(m1.resolve(m1.entries[0]));
  EXPECT_GE(first.width, 256u);
  EXPECT_GE(first.height, 256u);
  const auto other = generate_synthetic_corpus({}, scratch("c3"), 8);
  EXPECT_NE(load_image(other.resolve(other.entries[0])), first);
}

TEST(Corpus, SyntheticSceneHasStrongContrast) {
  const auto m = generate_synthetic_corpus({2, 2, 256, 256}, scratch("contrast"), 3);
  for (const auto& e : m.entries) {
    const ImagePlane y = rgb_to_luminance(load_image(m.resolve(e)));
    double lo = 255, hi = 0;
    for (double v : y.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_GT(hi - lo, 80.0) << e.path;
  }
}

// Text can fill a short image completely; later elements must still land inside it.
TEST(Corpus, SmallScenesAreNeverFlat) {
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    for (auto [w, h] : {std::pair<std::size_t, std::size_t>{128, 96}, {96, 64}, {64, 64}}) {
      Rng rng(seed);
      const auto font = synth::make_glyphs(rng, 20);
      const ImagePlane y = rgb_to_luminance(synth::scene(rng, w, h, font));
      const auto [lo, hi] = std::minmax_element(y.data.begin(), y.data.end());
      EXPECT_GT(*hi - *lo, 40.0) << "seed " << seed << " " << w << "x" << h;
    }
}

TEST(Corpus, StepEdgeStaysBelowItsTopRow) {
  Image img = make_rgb(20, 20);
  synth::step_edge(img, 10, 15, 1.0, {1, 1, 1}, 12);
  double above = 0, below = 0;
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 20; ++x) (y < 12 ? above : below) += img.at(x, y, 0);
  EXPECT_EQ(above, 0.0);
  EXPECT_GT(below, 20.0);
}

TEST(Corpus, RejectsBadSpec) {
  EXPECT_THROW(generate_synthetic_corpus({4, 5, 256, 256}, scratch("bad1"), 1), ConfigError);
  EXPECT_THROW(generate_synthetic_corpus({4, 2, 128, 256}, scratch("bad2"), 1), ConfigError);
}

TEST(Manifest, WriteReadRoundTrip) {
  const fs::path dir = scratch("manifest");
  CorpusManifest m{dir, {{"a.png", Split::kTrain, "en"}, {"sub/b.png", Split::kTest, ""}}};
  write_manifest(m, dir / kManifestName);
  const auto back = read_manifest(dir);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.root, dir);
  EXPECT_EQ(back.entries[0].path, "a.png");
  EXPECT_EQ(back.entries[0].tag, "en");
  EXPECT_EQ(back.entries[1].split, Split::kTest);
  EXPECT_EQ(back.resolve(back.entries[1]), dir / "sub/b.png");
}

TEST(Manifest, CommentsAndOptionalTag) {
  const fs::path dir = scratch("manifest2");
  std::ofstream(dir / "list.tsv") << "# corpus\n\nx.png\ttrain\r\ny.png\ttest\tzh\n";
  const auto m = read_manifest(dir / "list.tsv");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].tag, "");
  EXPECT_EQ(m.entries[1].tag, "zh");
}

TEST(Manifest, Errors) {
  const fs::path dir = scratch("manifest3");
  std::ofstream(dir / "dup.tsv") << "x.png\ttrain\nx.png\ttest\n";
  std::ofstream(dir / "split.tsv") << "x.png\tvalidation\n";
  std::ofstream(dir / "cols.tsv") << "x.png\n";
  EXPECT_THROW(read_manifest(dir / "dup.tsv"), IoError);
  EXPECT_THROW(read_manifest(dir / "split.tsv"), ConfigError);
  EXPECT_THROW(read_manifest(dir / "cols.tsv"), IoError);
  EXPECT_THROW(read_manifest(dir / "missing.tsv"), IoError);
}

TEST(Sampler, PyramidDims) {
  BatchSampler s({random_image(160, 150, 7)}, AugmentSpec{}, 4, 128);
  const auto b = s.sample<float>(3, 1);
  EXPECT_EQ(b.lr.shape(), (Shape{3, 3, 32, 32}));
  ASSERT_EQ(b.targets.images.size(), 2u);
  EXPECT_EQ(b.targets.images[0].shape(), (Shape{3, 3, 64, 64}));
  EXPECT_EQ(b.targets.images[1].shape(), (Shape{3, 3, 128, 128}));
}

TEST(Sampler, SameSeedSameBatch) {
  std::vector<Image> imgs{random_image(140, 140, 8), random_image(200, 130, 9)};
  BatchSampler a(imgs, AugmentSpec{}, 2, 64), b(imgs, AugmentSpec{}, 2, 64);
  const auto x = a.sample<float>(4, 99), y = b.sample<float>(4, 99);
  EXPECT_TRUE(std::equal(x.lr.data().begin(), x.lr.data().end(), y.lr.data().begin()));
  // Earlier draws do not shift later batches.
  a.sample<float>(2, 5);
  const auto z = a.sample<float>(4, 99);
  EXPECT_TRUE(std::equal(x.lr.data().begin(), x.lr.data().end(), z.lr.data().begin()));
  const auto w = a.sample<float>(4, 100);
  EXPECT_FALSE(std::equal(x.lr.data().begin(), x.lr.data().end(), w.lr.data().begin()));
}

TEST(Sampler, DegenerateCorpusReturnsTheImage) {
  const Image img = random_image(128, 128, 10);
  BatchSampler s({img}, AugmentSpec::identity(), 2, 128);
  const auto b = s.sample<double>(3, 4);
  const auto [lr, targets] = pyramid_from_patch(img, 2);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_EQ(from_tensor(b.targets.images[0], n), img);
    EXPECT_EQ(from_tensor(b.lr, n), lr);
  }
}

TEST(Sampler, SmallImagesAreSkippedWithWarning) {
  std::vector<std::string> warnings;
  BatchSampler s({random_image(130, 130, 11), random_image(100, 100, 12)}, AugmentSpec{}, 2, 128,
                 [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_EQ(s.eligible_images(), 1u);
  EXPECT_FALSE(warnings.empty());
  EXPECT_THROW(BatchSampler({random_image(100, 100, 13)}, AugmentSpec{}, 2, 128), ConfigError);
  EXPECT_THROW(BatchSampler({random_image(200, 200, 14)}, AugmentSpec{}, 3, 128), ConfigError);
  EXPECT_THROW(BatchSampler({random_image(200, 200, 15)}, AugmentSpec{}, 4, 130), ConfigError);
}

TEST(Sampler, TargetsAreClampedBicubicReductions) {
  const Image img = random_image(128, 128, 16);
  const auto [lr, targets] = pyramid_from_patch(img, 4);
  ASSERT_EQ(targets.size(), 2u);
  EXPECT_EQ(targets[1], img);
  Image half = bicubic_resize(img, 64, 64);
  EXPECT_EQ(targets[0], half.clamp());
  Image quarter = bicubic_resize(img, 32, 32);
  EXPECT_EQ(lr, quarter.clamp());
}
