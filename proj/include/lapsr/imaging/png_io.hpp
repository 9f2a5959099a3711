#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/imaging/image.hpp"

namespace lapsr {

// Reads an 8-bit PNG as RGB in [0, 1] (v / 255). Grayscale is replicated to
// three channels, palettes are expanded, alpha is dropped.
inline Image load_image(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw IoError("cannot read PNG '" + path.string() + "': " + png.message);
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw IoError("unsupported bit depth in '" + path.string() + "' (only 8-bit PNG is supported)");
  }
  // Without a background, dropping alpha would composite; keep it and skip it.
  png.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  Image img(png.width, png.height, 3);
  for (std::size_t i = 0; i < std::size_t{png.width} * png.height; ++i)
    for (std::size_t c = 0; c < 3; ++c) img.data[i * 3 + c] = buf[i * 4 + c] / 255.0;
  return img;
}

// Quantizes v in [0, 1] to a byte: clamp, then round half up.
inline std::uint8_t to_byte(double v) {
  const double s = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(s);
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 3 && img.channels != 1) throw IoError("save_image supports 1 or 3 channels");
  if (img.width == 0 || img.height == 0) throw IoError("save_image: empty image");
  std::vector<std::uint8_t> buf(img.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.data[i]);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path.string() + "': " + png.message);
}

}  // namespace lapsr
