#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "panodepth/core.hpp"
#include "panodepth/error.hpp"
#include "panodepth/geometry.hpp"

namespace panodepth::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "io assumes a little-endian host");

/// Largest accepted width or height, and pixel count, when decoding.
inline constexpr std::uint64_t kMaxSide = 1u << 16;
inline constexpr std::uint64_t kMaxPixels = 1ull << 28;

enum class DepthFormat { kPfm, kPng16, kRawF32 };

struct DepthFileFormat {
  DepthFormat kind = DepthFormat::kPfm;
  double png_scale = 256.0;  // counts per meter, PNG16 only
  fs::path sidecar;          // RAWF32 only; empty means "<path>.json"

  static DepthFileFormat pfm() { return {DepthFormat::kPfm, 256.0, {}}; }
  static DepthFileFormat png16(double scale) {
    if (!(std::isfinite(scale) && scale > 0.0)) throw ArgumentError("PNG16 scale must be positive");
    return {DepthFormat::kPng16, scale, {}};
  }
  static DepthFileFormat rawf32(fs::path sidecar = {}) { return {DepthFormat::kRawF32, 256.0, std::move(sidecar)}; }
};

/// Format from the file extension: .pfm, .png, .raw/.f32/.bin.
inline DepthFileFormat detect_format(const fs::path& path, double png_scale = 256.0) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pfm") return DepthFileFormat::pfm();
  if (ext == ".png") return DepthFileFormat::png16(png_scale);
  if (ext == ".raw" || ext == ".f32" || ext == ".bin") return DepthFileFormat::rawf32();
  throw ArgumentError("cannot infer depth format from extension '" + ext + "' of " + path.string());
}

namespace detail {

inline std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

inline void check_dims(std::uint64_t w, std::uint64_t h, std::uint64_t offset) {
  if (w == 0 || h == 0 || w > kMaxSide || h > kMaxSide || w * h > kMaxPixels) {
    throw FormatError("image dimensions " + std::to_string(w) + "x" + std::to_string(h) + " out of range", offset);
  }
}

/// Cursor over a PFM header: whitespace-separated ASCII tokens.
class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<unsigned char>& buf) : buf_(buf) {}

  std::string token() {
    while (pos_ < buf_.size() && std::isspace(buf_[pos_])) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < buf_.size() && !std::isspace(buf_[pos_])) ++pos_;
    if (start == pos_) throw FormatError("PFM header truncated", pos_);
    return {buf_.begin() + static_cast<std::ptrdiff_t>(start), buf_.begin() + static_cast<std::ptrdiff_t>(pos_)};
  }

  std::uint64_t integer() {
    const std::size_t at = skip_ws();
    const std::string t = token();
    std::uint64_t v = 0;
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c)) || v > kMaxPixels) {
        throw FormatError("PFM header: bad dimension '" + t + "'", at);
      }
      v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
  }

  double real() {
    const std::size_t at = skip_ws();
    const std::string t = token();
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v) || v == 0.0) {
      throw FormatError("PFM header: bad scale '" + t + "'", at);
    }
    return v;
  }

  /// Consumes exactly one whitespace byte that ends the header.
  std::size_t end_of_header() {
    if (pos_ >= buf_.size() || !std::isspace(buf_[pos_])) throw FormatError("PFM header not terminated", pos_);
    return ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }

 private:
  std::size_t skip_ws() {
    while (pos_ < buf_.size() && std::isspace(buf_[pos_])) ++pos_;
    return pos_;
  }

  const std::vector<unsigned char>& buf_;
  std::size_t pos_ = 0;
};

/// Stored value for a pixel: invalid pixels are written as 0 so that a
/// round trip restores the validity mask.
inline float stored(const DepthMap& d, std::size_t i) { return d.is_valid(i) ? d.value(i) : 0.0f; }

}  // namespace detail

// ---------------------------------------------------------------------------
// PFM: "Pf\n<W> <H>\n<scale>\n" then float32 rows, bottom row first. A
// negative scale means little-endian.

inline void write_pfm(const DepthMap& d, const fs::path& path) {
  std::string header = "Pf\n" + std::to_string(d.width()) + " " + std::to_string(d.height()) + "\n-1.0\n";
  std::vector<unsigned char> buf(header.begin(), header.end());
  buf.reserve(header.size() + d.size() * 4);
  for (int v = d.height() - 1; v >= 0; --v) {
    for (int u = 0; u < d.width(); ++u) {
      const float f = detail::stored(d, d.values().index(u, v));
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      buf.insert(buf.end(), b, b + 4);
    }
  }
  detail::write_file(path, buf.data(), buf.size());
}

inline Raster<float> read_pfm_raster(const fs::path& path) {
  const auto buf = detail::read_file(path);
  detail::HeaderReader hr(buf);
  const std::string magic = hr.token();
  if (magic == "PF") throw FormatError("PFM: three-channel files are not depth maps", 0);
  if (magic != "Pf") throw FormatError("PFM: bad magic '" + magic + "'", 0);
  const std::uint64_t w = hr.integer();
  const std::size_t dim_at = hr.pos();
  const std::uint64_t h = hr.integer();
  detail::check_dims(w, h, dim_at);
  const double scale = hr.real();
  const std::size_t data_at = hr.end_of_header();
  const std::uint64_t need = w * h * 4;
  if (buf.size() - data_at < need) {
    throw FormatError("PFM payload truncated: need " + std::to_string(need) + " bytes, have " +
                          std::to_string(buf.size() - data_at),
                      buf.size());
  }
  const bool swap = scale > 0.0;  // positive scale: big-endian payload
  Raster<float> out(static_cast<int>(w), static_cast<int>(h));
  std::size_t at = data_at;
  for (int v = static_cast<int>(h) - 1; v >= 0; --v) {
    for (int u = 0; u < static_cast<int>(w); ++u, at += 4) {
      std::uint32_t bits;
      std::memcpy(&bits, buf.data() + at, 4);
      if (swap) bits = __builtin_bswap32(bits);
      out(u, v) = std::bit_cast<float>(bits);
    }
  }
  return out;
}

inline DepthMap read_pfm(const fs::path& path) { return DepthMap::from_values(read_pfm_raster(path)); }

// ---------------------------------------------------------------------------
// PNG16: 16-bit grayscale, value = round(depth × scale) clamped to
// [0, 65535]; 0 marks invalid pixels.

namespace detail {

struct PngReadState {
  const std::vector<unsigned char>* buf;
  std::size_t pos;
  char message[256];
};

inline void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->buf->size()) png_error(png, "unexpected end of file");
  std::memcpy(out, st->buf->data() + st->pos, n);
  st->pos += n;
}

inline void png_error_cb(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngReadState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof st->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_cb(png_structp, png_const_charp) {}

struct PngWriteState {
  std::vector<unsigned char>* out;
  char message[256];
};

inline void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + n);
}

inline void png_flush_cb(png_structp) {}

inline void png_write_error_cb(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngWriteState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof st->message, "%s", msg);
  png_longjmp(png, 1);
}

/// Decodes into `rows` (row-major, host order). Returns false with
/// `st.message` set on failure. No C++ objects are created after setjmp.
inline bool decode_png16(PngReadState& st, std::vector<std::uint16_t>& pixels, std::uint32_t& w,
                         std::uint32_t& h, int& bit_depth, int& color_type) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, png_error_cb, png_warning_cb);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &st, png_read_cb);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  bit_depth = png_get_bit_depth(png, info);
  color_type = png_get_color_type(png, info);
  if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY || w == 0 || h == 0 ||
      static_cast<std::uint64_t>(w) * h > kMaxPixels || w > kMaxSide || h > kMaxSide) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;  // caller reports the header mismatch
  }
  png_set_swap(png);
  pixels.resize(static_cast<std::size_t>(w) * h);
  for (std::uint32_t r = 0; r < h; ++r) {
    png_read_row(png, reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * w), nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace detail

inline void write_png16(const DepthMap& d, const fs::path& path, double scale) {
  if (!(std::isfinite(scale) && scale > 0.0)) throw ArgumentError("PNG16 scale must be positive");
  std::vector<std::uint16_t> pixels(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.is_valid(i)) continue;
    const double q = std::round(static_cast<double>(d.value(i)) * scale);
    pixels[i] = static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
  }
  std::vector<unsigned char> out;
  detail::PngWriteState st{&out, {0}};
  const auto w = static_cast<std::uint32_t>(d.width());
  const auto h = static_cast<std::uint32_t>(d.height());
  bool ok = false;
  {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, detail::png_write_error_cb,
                                              detail::png_warning_cb);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (png && info && !setjmp(png_jmpbuf(png))) {
      png_set_write_fn(png, &st, detail::png_write_cb, detail::png_flush_cb);
      png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                   PNG_FILTER_TYPE_DEFAULT);
      png_write_info(png, info);
      png_set_swap(png);
      for (std::uint32_t r = 0; r < h; ++r) {
        png_write_row(png, reinterpret_cast<png_const_bytep>(pixels.data() + static_cast<std::size_t>(r) * w));
      }
      png_write_end(png, nullptr);
      ok = true;
    }
    png_destroy_write_struct(&png, &info);
  }
  if (!ok) throw std::runtime_error("PNG encode failed: " + std::string(st.message));
  detail::write_file(path, out.data(), out.size());
}

inline DepthMap read_png16(const fs::path& path, double scale) {
  if (!(std::isfinite(scale) && scale > 0.0)) throw ArgumentError("PNG16 scale must be positive");
  const auto buf = detail::read_file(path);
  if (buf.size() < 8 || png_sig_cmp(buf.data(), 0, 8) != 0) throw FormatError("not a PNG file", 0);
  detail::PngReadState st{&buf, 0, {0}};
  std::vector<std::uint16_t> pixels;
  std::uint32_t w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  if (!detail::decode_png16(st, pixels, w, h, bit_depth, color_type)) {
    throw FormatError("PNG decode failed: " + std::string(st.message), st.pos);
  }
  if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
    throw FormatError("PNG16 depth must be 16-bit grayscale (got depth " + std::to_string(bit_depth) +
                          ", color type " + std::to_string(color_type) + ")",
                      16);
  }
  if (pixels.empty()) throw FormatError("PNG dimensions out of range", 16);
  Raster<float> values(static_cast<int>(w), static_cast<int>(h), 0.0f);
  Raster<std::uint8_t> valid(static_cast<int>(w), static_cast<int>(h), 0);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (pixels[i] == 0) continue;
    values[i] = static_cast<float>(pixels[i] / scale);
    valid[i] = 1;
  }
  return DepthMap(std::move(values), std::move(valid));
}

// ---------------------------------------------------------------------------
// RAWF32: row-major little-endian float32 with a JSON sidecar
// {"width": W, "height": H, "unit": "m"}.

inline fs::path default_sidecar(const fs::path& path) { return fs::path(path.string() + ".json"); }

inline void write_raw_f32(const Raster<float>& r, const fs::path& path, const std::string& unit = "m",
                          fs::path sidecar = {}) {
  if (sidecar.empty()) sidecar = default_sidecar(path);
  detail::write_file(path, r.data().data(), r.size() * sizeof(float));
  const nlohmann::json meta = {{"width", r.width()}, {"height", r.height()}, {"unit", unit}};
  const std::string text = meta.dump() + "\n";
  detail::write_file(sidecar, text.data(), text.size());
}

struct RawF32 {
  Raster<float> values;
  std::string unit;
};

inline RawF32 read_raw_f32(const fs::path& path, fs::path sidecar = {}) {
  if (sidecar.empty()) sidecar = default_sidecar(path);
  const auto meta_bytes = detail::read_file(sidecar);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("RAWF32 sidecar is not valid JSON: " + std::string(e.what()), e.byte);
  }
  if (!meta.is_object() || !meta.contains("width") || !meta.contains("height") ||
      !meta["width"].is_number_unsigned() || !meta["height"].is_number_unsigned()) {
    throw FormatError("RAWF32 sidecar needs unsigned integer 'width' and 'height'", 0);
  }
  const std::uint64_t w = meta["width"];
  const std::uint64_t h = meta["height"];
  detail::check_dims(w, h, 0);
  const std::string unit = meta.value("unit", std::string("m"));
  const auto buf = detail::read_file(path);
  if (buf.size() != w * h * 4) {
    throw FormatError("RAWF32 payload has " + std::to_string(buf.size()) + " bytes, sidecar implies " +
                          std::to_string(w * h * 4),
                      std::min<std::uint64_t>(buf.size(), w * h * 4));
  }
  Raster<float> values(static_cast<int>(w), static_cast<int>(h));
  std::memcpy(values.data().data(), buf.data(), buf.size());
  return {std::move(values), unit};
}

inline void write_rawf32_depth(const DepthMap& d, const fs::path& path, fs::path sidecar = {}) {
  Raster<float> r(d.width(), d.height());
  for (std::size_t i = 0; i < d.size(); ++i) r[i] = detail::stored(d, i);
  write_raw_f32(r, path, "m", std::move(sidecar));
}

inline DepthMap read_rawf32_depth(const fs::path& path, fs::path sidecar = {}) {
  auto raw = read_raw_f32(path, std::move(sidecar));
  if (raw.unit != "m") throw FormatError("RAWF32 depth must have unit \"m\", got \"" + raw.unit + "\"", 0);
  return DepthMap::from_values(std::move(raw.values));
}

// ---------------------------------------------------------------------------

inline DepthMap read_depth(const fs::path& path, const DepthFileFormat& fmt) {
  switch (fmt.kind) {
    case DepthFormat::kPfm: return read_pfm(path);
    case DepthFormat::kPng16: return read_png16(path, fmt.png_scale);
    case DepthFormat::kRawF32: return read_rawf32_depth(path, fmt.sidecar);
  }
  throw ArgumentError("unknown depth format");
}

inline void write_depth(const DepthMap& d, const fs::path& path, const DepthFileFormat& fmt) {
  switch (fmt.kind) {
    case DepthFormat::kPfm: return write_pfm(d, path);
    case DepthFormat::kPng16: return write_png16(d, path, fmt.png_scale);
    case DepthFormat::kRawF32: return write_rawf32_depth(d, path, fmt.sidecar);
  }
}

inline DepthMap read_depth(const fs::path& path, double png_scale = 256.0) {
  return read_depth(path, detect_format(path, png_scale));
}

inline void write_depth(const DepthMap& d, const fs::path& path, double png_scale = 256.0) {
  write_depth(d, path, detect_format(path, png_scale));
}

/// Soft or hard mask from a PFM or RAWF32 file; values must lie in [0, 1].
inline BinaryMask read_mask(const fs::path& path) {
  const auto fmt = detect_format(path);
  switch (fmt.kind) {
    case DepthFormat::kPfm: return BinaryMask(read_pfm_raster(path));
    case DepthFormat::kRawF32: return BinaryMask(read_raw_f32(path).values);
    case DepthFormat::kPng16: break;
  }
  throw ArgumentError("masks are read from .pfm or RAWF32 files, not " + path.string());
}

inline void write_mask(const BinaryMask& m, const fs::path& path) {
  const auto fmt = detect_format(path);
  if (fmt.kind == DepthFormat::kPfm) {
    write_pfm(DepthMap::from_values(m.values()), path);
  } else if (fmt.kind == DepthFormat::kRawF32) {
    write_raw_f32(m.values(), path, "mask");
  } else {
    throw ArgumentError("masks are written as .pfm or RAWF32 files, not " + path.string());
  }
}

/// Normals as interleaved little-endian float32 xyz with a sidecar
/// {"width", "height", "channels": 3, "unit": "unit_vector"}. Invalid
/// pixels are (0, 0, 0).
inline void write_normals(const NormalMap& n, const fs::path& path) {
  std::vector<float> buf(static_cast<std::size_t>(n.width()) * n.height() * 3, 0.0f);
  for (std::size_t i = 0; i < n.normals.size(); ++i) {
    if (!n.valid[i]) continue;
    buf[3 * i] = static_cast<float>(n.normals[i].x);
    buf[3 * i + 1] = static_cast<float>(n.normals[i].y);
    buf[3 * i + 2] = static_cast<float>(n.normals[i].z);
  }
  detail::write_file(path, buf.data(), buf.size() * sizeof(float));
  const nlohmann::json meta = {{"width", n.width()}, {"height", n.height()}, {"channels", 3}, {"unit", "unit_vector"}};
  const std::string text = meta.dump() + "\n";
  detail::write_file(default_sidecar(path), text.data(), text.size());
}

/// ASCII PLY, one vertex per valid point.
inline void write_pointcloud(const PointCloud& pc, const fs::path& path) {
  const std::size_t n = pc.valid_count();
  if (n == 0) throw ArgumentError("write_pointcloud: no valid points");
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\nelement vertex " << n
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char line[96];
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    if (!pc.valid[i]) continue;
    const Vec3& p = pc.points[i];
    std::snprintf(line, sizeof line, "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    out << line;
  }
  const std::string text = out.str();
  detail::write_file(path, text.data(), text.size());
}

}  // namespace panodepth::io
