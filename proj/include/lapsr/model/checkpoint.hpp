#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "lapsr/error.hpp"
#include "lapsr/model/lapsrn.hpp"

// Checkpoint layout, all integers little-endian:
//
//   "LPSR" | u16 version
//   config: u32 scale | u32 levels | u32 convs_per_level | u32 feature_channels
//           | u32 image_channels | f64 leaky_slope
//   u32 record count, then per record:
//     u32 name length | name bytes | u8 dtype (1 = f32, 2 = f64)
//     | 4 x u32 dims (n, c, h, w) | raw little-endian values

namespace lapsr {

inline constexpr std::array<char, 4> kCheckpointMagic{'L', 'P', 'S', 'R'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace io {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <class V>
    requires std::is_arithmetic_v<V>
  void put(V v) {
    bytes(&v, sizeof v);
  }
  void str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buf_; }

  void write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open '" + path.string() + "' for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "failed writing '" + path.string() + "'");
  }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}

  static std::vector<char> file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open '" + path.string() + "'");
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  }

  void bytes(void* p, std::size_t n) {
    if (n > buf_.size() - pos_) throw CheckpointError(CheckpointError::Kind::kTruncated, "unexpected end of checkpoint");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <class V>
    requires std::is_arithmetic_v<V>
  V get() {
    V v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    if (n > remaining()) throw CheckpointError(CheckpointError::Kind::kTruncated, "unexpected end of checkpoint");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

template <class T>
constexpr std::uint8_t dtype_tag() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? 1 : 2;
}

template <class T>
void write_tensor(Writer& w, const std::string& name, const Tensor<T>& t) {
  w.str(name);
  w.put(dtype_tag<T>());
  const Shape& s = t.shape();
  for (std::size_t d : {s.n, s.c, s.h, s.w}) w.put(static_cast<std::uint32_t>(d));
  w.bytes(t.data().data(), t.numel() * sizeof(T));
}

template <class T>
NamedTensor<T> read_tensor(Reader& r) {
  NamedTensor<T> out;
  out.name = r.str();
  const auto tag = r.get<std::uint8_t>();
  if (tag != 1 && tag != 2)
    throw CheckpointError(CheckpointError::Kind::kDtype, "unknown dtype tag " + std::to_string(tag) + " for '" + out.name + "'");
  if (tag != dtype_tag<T>())
    throw CheckpointError(CheckpointError::Kind::kDtype, "dtype of '" + out.name + "' does not match the requested precision");
  Shape s;
  s.n = r.get<std::uint32_t>();
  s.c = r.get<std::uint32_t>();
  s.h = r.get<std::uint32_t>();
  s.w = r.get<std::uint32_t>();
  if (s.numel() * sizeof(T) > r.remaining())
    throw CheckpointError(CheckpointError::Kind::kTruncated, "unexpected end of checkpoint");
  out.value = Tensor<T>(s);
  r.bytes(out.value.data().data(), s.numel() * sizeof(T));
  return out;
}

inline void write_model_config(Writer& w, const ModelConfig& cfg) {
  w.put(cfg.scale);
  w.put(cfg.levels());
  w.put(cfg.convs_per_level);
  w.put(cfg.feature_channels);
  w.put(cfg.image_channels);
  w.put(cfg.leaky_slope);
}

inline ModelConfig read_model_config(Reader& r) {
  ModelConfig cfg;
  cfg.scale = r.get<std::uint32_t>();
  const auto levels = r.get<std::uint32_t>();
  cfg.convs_per_level = r.get<std::uint32_t>();
  cfg.feature_channels = r.get<std::uint32_t>();
  cfg.image_channels = r.get<std::uint32_t>();
  cfg.leaky_slope = r.get<double>();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::kShapeTable, std::string("invalid config block: ") + e.what());
  }
  if (levels != cfg.levels())
    throw CheckpointError(CheckpointError::Kind::kShapeTable, "config block level count disagrees with scale");
  return cfg;
}

}  // namespace io

template <class T>
std::vector<char> serialize_checkpoint(const ModelParams<T>& params) {
  io::Writer w;
  w.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.put(kCheckpointVersion);
  io::write_model_config(w, params.config);
  w.put(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    for (T v : t.value.data())
      if (!std::isfinite(v)) throw CheckpointError(CheckpointError::Kind::kIo, "refusing to save non-finite parameter '" + t.name + "'");
    io::write_tensor(w, t.name, t.value);
  }
  return w.buffer();
}

template <class T>
ModelParams<T> deserialize_checkpoint(std::vector<char> bytes) {
  io::Reader r(std::move(bytes));
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kCheckpointMagic) throw CheckpointError(CheckpointError::Kind::kBadMagic, "not a checkpoint (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::kVersion, "unsupported checkpoint version " + std::to_string(version));
  ModelParams<T> params;
  params.config = io::read_model_config(r);
  const auto layout = parameter_layout(params.config);
  const auto count = r.get<std::uint32_t>();
  if (count != layout.size())
    throw CheckpointError(CheckpointError::Kind::kShapeTable,
                          "checkpoint has " + std::to_string(count) + " tensors, config implies " + std::to_string(layout.size()));
  for (const auto& [name, shape] : layout) {
    auto t = io::read_tensor<T>(r);
    if (t.name != name || t.value.shape() != shape)
      throw CheckpointError(CheckpointError::Kind::kShapeTable,
                            "shape table mismatch: got '" + t.name + "' " + t.value.shape().str() + ", expected '" + name + "' " + shape.str());
    t.value.set_requires_grad(true);
    params.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw CheckpointError(CheckpointError::Kind::kShapeTable, "trailing bytes after last tensor record");
  return params;
}

template <class T>
void save_checkpoint(const ModelParams<T>& params, const std::filesystem::path& path) {
  io::Writer w;
  const auto bytes = serialize_checkpoint(params);
  w.bytes(bytes.data(), bytes.size());
  w.write_file(path);
}

template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint<T>(io::Reader::file_bytes(path));
}

}  // namespace lapsr
