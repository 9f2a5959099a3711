#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/image.hpp"
#include "lapsr/imaging/png_io.hpp"
#include "lapsr/rng.hpp"

// Corpus directory layout:
//
//   <root>/manifest.tsv           one entry per line: <relative-path>\t<split>\t<tag>
//   <root>/<relative-path>.png    images referenced by the manifest
//
// Blank lines and lines starting with '#' are ignored. The tag column is
// optional on read.

namespace lapsr {

enum class Split { kTrain, kTest };

inline std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "'");
}

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  Split split = Split::kTrain;
  std::string tag;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> select(Split split) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.split == split) out.push_back(e);
    return out;
  }
  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }
};

inline constexpr const char* kManifestName = "manifest.tsv";

inline void write_manifest(const CorpusManifest& m, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + file.string() + "'");
  for (const auto& e : m.entries) out << e.path << '\t' << to_string(e.split) << '\t' << e.tag << '\n';
  if (!out) throw IoError("failed writing manifest '" + file.string() + "'");
}

// Accepts either a manifest file or a corpus directory containing one.
inline CorpusManifest read_manifest(const std::filesystem::path& where) {
  const auto file = std::filesystem::is_directory(where) ? where / kManifestName : where;
  std::ifstream in(file);
  if (!in) throw IoError("cannot read manifest '" + file.string() + "'");
  CorpusManifest m;
  m.root = file.parent_path();
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 2 || cols.size() > 3)
      throw IoError(file.string() + ":" + std::to_string(line_no) + ": expected <path>\\t<split>[\\t<tag>]");
    ManifestEntry e{cols[0], parse_split(cols[1]), cols.size() == 3 ? cols[2] : ""};
    if (!seen.insert(e.path).second)
      throw IoError(file.string() + ":" + std::to_string(line_no) + ": duplicate path '" + e.path + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

namespace synth {

struct Color {
  double r, g, b;
};

inline Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

inline double luma(const Color& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

// A colour contrasting with `bg` by at least 0.45 in luma.
inline Color contrasting_color(Rng& rng, const Color& bg) {
  Color c = random_color(rng);
  if (std::abs(luma(c) - luma(bg)) >= 0.45) return c;
  const double target = luma(bg) > 0.5 ? 0.1 : 0.9;
  const double shift = target - luma(c);
  return {std::clamp(c.r + shift, 0.0, 1.0), std::clamp(c.g + shift, 0.0, 1.0), std::clamp(c.b + shift, 0.0, 1.0)};
}

inline void blend(Image& img, std::size_t x, std::size_t y, const Color& c, double coverage) {
  const double k = std::clamp(coverage, 0.0, 1.0);
  img.at(x, y, 0) = (1 - k) * img.at(x, y, 0) + k * c.r;
  img.at(x, y, 1) = (1 - k) * img.at(x, y, 1) + k * c.g;
  img.at(x, y, 2) = (1 - k) * img.at(x, y, 2) + k * c.b;
}

inline void fill_rect(Image& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, const Color& c) {
  for (std::size_t y = y0; y < std::min(img.height, y0 + h); ++y)
    for (std::size_t x = x0; x < std::min(img.width, x0 + w); ++x) blend(img, x, y, c, 1.0);
}

// Two-colour checkerboard; cell (x / pitch + y / pitch) even takes `a`.
inline Image checkerboard(std::size_t width, std::size_t height, std::size_t pitch, const Color& a, const Color& b) {
  if (pitch == 0) throw ConfigError("checkerboard pitch must be >= 1");
  Image img = make_rgb(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) blend(img, x, y, ((x / pitch + y / pitch) % 2 == 0) ? a : b, 1.0);
  return img;
}

inline void gradient_background(Image& img, const Color& a, const Color& b, bool vertical) {
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double t = vertical ? static_cast<double>(y) / static_cast<double>(img.height - 1)
                                : static_cast<double>(x) / static_cast<double>(img.width - 1);
      img.at(x, y, 0) = (1 - t) * a.r + t * b.r;
      img.at(x, y, 1) = (1 - t) * a.g + t * b.g;
      img.at(x, y, 2) = (1 - t) * a.b + t * b.b;
    }
}

// Half-plane edge through (cx, cy) with normal angle `theta`, anti-aliased by
// 4x4 supersampling of pixel coverage. Rows above `top` are left alone.
inline void step_edge(Image& img, double cx, double cy, double theta, const Color& c, std::size_t top = 0) {
  const double nx = std::cos(theta), ny = std::sin(theta);
  for (std::size_t y = top; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double d = (static_cast<double>(x) + 0.5 - cx) * nx + (static_cast<double>(y) + 0.5 - cy) * ny;
      if (d < -1.0) continue;
      double cover = 1.0;
      if (d < 1.0) {
        int inside = 0;
        for (int sy = 0; sy < 4; ++sy)
          for (int sx = 0; sx < 4; ++sx) {
            const double px = static_cast<double>(x) + (sx + 0.5) / 4.0 - cx;
            const double py = static_cast<double>(y) + (sy + 0.5) / 4.0 - cy;
            inside += (px * nx + py * ny) >= 0.0;
          }
        cover = inside / 16.0;
      }
      blend(img, x, y, c, cover);
    }
}

using Glyph = std::array<std::uint8_t, 7>;  // 5 columns per row, bit 4 = leftmost

// Random 5x7 bitmaps standing in for a font.
inline std::vector<Glyph> make_glyphs(Rng& rng, std::size_t count) {
  std::vector<Glyph> glyphs(count);
  for (auto& g : glyphs) {
    for (auto& row : g) row = static_cast<std::uint8_t>(rng.below(32));
    // Vertical stem keeps glyphs connected and text-like.
    const auto stem = static_cast<unsigned>(rng.below(5));
    for (std::size_t r = 1; r < 6; ++r) g[r] |= static_cast<std::uint8_t>(1u << stem);
  }
  return glyphs;
}

// Lines of glyphs at pixel size `cell` starting at `top`; returns the y below
// the last line drawn.
inline std::size_t text_block(Image& img, Rng& rng, const std::vector<Glyph>& font, std::size_t top,
                              std::size_t lines, std::size_t cell, const Color& ink) {
  const std::size_t gw = 5 * cell, gh = 7 * cell, advance = gw + cell, line_h = gh + 3 * cell;
  std::size_t y = top;
  for (std::size_t l = 0; l < lines && y + gh < img.height; ++l, y += line_h) {
    std::size_t x = 4 + rng.below(3 * cell + 1);
    while (x + gw < img.width - 4) {
      if (rng.uniform() < 0.15) {  // word gap
        x += advance;
        continue;
      }
      const Glyph& g = font[rng.below(font.size())];
      for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 5; ++c)
          if (g[r] & (1u << (4 - c))) fill_rect(img, x + c * cell, y + r * cell, cell, cell, ink);
      x += advance;
    }
  }
  return y;
}

// Composite scene: flat or gradient background, text lines, bars, a
// checkerboard patch and an anti-aliased step edge. Strokes, bar pitches and
// checker cells are at least 2 px wide so they survive a x2 reduction.
inline Image scene(Rng& rng, std::size_t width, std::size_t height, const std::vector<Glyph>& font) {
  Image img = make_rgb(width, height);
  const Color bg_a = random_color(rng);
  const Color bg_b = random_color(rng);
  if (rng.uniform() < 0.5) {
    gradient_background(img, bg_a, bg_a, false);
  } else {
    gradient_background(img, bg_a, bg_b, rng.uniform() < 0.5);
  }

  const Color ink = contrasting_color(rng, bg_a);
  const std::size_t cell = 2 + rng.below(3);
  std::size_t y = text_block(img, rng, font, 6, 2 + rng.below(3), cell, ink);

  // Bars: vertical or horizontal stripes of random pitch.
  const Color bar = contrasting_color(rng, bg_a);
  const std::size_t bar_h = height / 6;
  const std::size_t pitch = 3 + rng.below(8);
  const bool vertical = rng.uniform() < 0.5;
  for (std::size_t yy = y; yy < std::min(height, y + bar_h); ++yy)
    for (std::size_t xx = 0; xx < width / 2; ++xx)
      if (((vertical ? xx : yy) / pitch) % 2 == 0) blend(img, xx, yy, bar, 1.0);

  // Checkerboard patch to the right of the bars.
  const std::size_t check_pitch = 3 + rng.below(10);
  const Image board = checkerboard(width / 2, bar_h, check_pitch, random_color(rng), random_color(rng));
  for (std::size_t yy = 0; yy < board.height && y + yy < height; ++yy)
    for (std::size_t xx = 0; xx < board.width; ++xx)
      for (std::size_t c = 0; c < 3; ++c) img.at(width / 2 + xx, y + yy, c) = board.at(xx, yy, c);
  y += bar_h + 4;

  // Anti-aliased edge confined to the lower band, then more text on top of it.
  // Short images can be full by now; the band then starts at 3/4 height.
  const std::size_t band = std::min(y, height * 3 / 4);
  step_edge(img, width * (0.2 + 0.6 * rng.uniform()), static_cast<double>(band + height) * 0.5,
            rng.uniform() * 2.0 * 3.141592653589793, random_color(rng), band);
  if (y + 8 < height) text_block(img, rng, font, y + 4, 8, 2 + rng.below(2), contrasting_color(rng, bg_a));
  return img.clamp();
}

}  // namespace synth

struct SyntheticCorpusSpec {
  std::size_t count = 10;
  std::size_t train_count = 8;
  std::size_t width = 256;
  std::size_t height = 256;
};

// Writes `count` synthetic PNGs plus manifest.tsv into `out_dir`. Output is a
// pure function of (spec, seed).
inline CorpusManifest generate_synthetic_corpus(const SyntheticCorpusSpec& spec, const std::filesystem::path& out_dir,
                                                std::uint64_t seed) {
  if (spec.train_count > spec.count) throw ConfigError("train_count exceeds count");
  if (spec.width < 256 || spec.height < 256) throw ConfigError("synthetic images must be at least 256x256");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  Rng font_rng(mix_seed(seed, 0));
  const auto font = synth::make_glyphs(font_rng, 40);
  CorpusManifest m;
  m.root = out_dir;
  for (std::size_t i = 0; i < spec.count; ++i) {
    Rng rng(mix_seed(seed, i + 1));
    const Image img = synth::scene(rng, spec.width, spec.height, font);
    char name[32];
    std::snprintf(name, sizeof name, "img_%03zu.png", i);
    save_image(img, out_dir / name);
    m.entries.push_back({name, i < spec.train_count ? Split::kTrain : Split::kTest, "synthetic"});
  }
  write_manifest(m, out_dir / kManifestName);
  return m;
}

}  // namespace lapsr
