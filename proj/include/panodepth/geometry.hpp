#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "panodepth/core.hpp"
#include "panodepth/error.hpp"
#include "panodepth/raster.hpp"

namespace panodepth {

/*
 Spherical convention shared by every module:

     +y (up)
      |   +z (forward, longitude 0)
      |  /
      | /
      |/
      +------ +x (right, longitude +90°)

 Pixel (u, v) has its center at continuous coordinate (u + 0.5, v + 0.5):
   longitude  θ = 2π (u + 0.5) / W − π      (column 0 starts at the −π seam)
   latitude   φ = π/2 − π (v + 0.5) / H     (row 0 is next to the north pole)
   direction    = (cos φ sin θ, sin φ, cos φ cos θ)
*/

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  constexpr Vec3& operator+=(Vec3 b) {
    x += b.x;
    y += b.y;
    z += b.z;
    return *this;
  }
  constexpr Vec3& operator-=(Vec3 b) {
    x -= b.x;
    y -= b.y;
    z -= b.z;
    return *this;
  }
  friend constexpr bool operator==(Vec3, Vec3) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double norm1(Vec3 a) { return std::abs(a.x) + std::abs(a.y) + std::abs(a.z); }
inline Vec3 normalized(Vec3 a) { return a / norm(a); }

/// Unit-length 3D vector.
class Direction {
 public:
  explicit Direction(Vec3 v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw ArgumentError("Direction: zero or non-finite vector");
    v_ = v / n;
  }
  Direction(double x, double y, double z) : Direction(Vec3{x, y, z}) {}

  double x() const noexcept { return v_.x; }
  double y() const noexcept { return v_.y; }
  double z() const noexcept { return v_.z; }
  Vec3 vec() const noexcept { return v_; }

  friend bool operator==(const Direction&, const Direction&) = default;

 private:
  Vec3 v_;
};

/// Equirectangular pixel lattice covering the full 360°×180° sphere.
class ErpGrid {
 public:
  ErpGrid(int width, int height) : width_(width), height_(height) {
    if (width < 2 || height < 1) throw ArgumentError("ErpGrid: need width >= 2 and height >= 1");
  }

  template <typename T>
  static ErpGrid of(const Raster<T>& r) {
    return ErpGrid(r.width(), r.height());
  }
  template <std::floating_point T>
  static ErpGrid of(const BasicDepthMap<T>& d) {
    return ErpGrid(d.width(), d.height());
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  double longitude(double u) const noexcept {
    return 2.0 * std::numbers::pi * (u + 0.5) / width_ - std::numbers::pi;
  }
  double latitude(double v) const noexcept {
    return std::numbers::pi / 2.0 - std::numbers::pi * (v + 0.5) / height_;
  }

  friend bool operator==(const ErpGrid&, const ErpGrid&) = default;

 private:
  int width_;
  int height_;
};

namespace detail {

inline Vec3 lonlat_to_vec(double lon, double lat) {
  const double c = std::cos(lat);
  return {c * std::sin(lon), std::sin(lat), c * std::cos(lon)};
}

/// Unchecked ray for pixel indices; hot loops call this directly.
inline Vec3 pixel_ray(const ErpGrid& g, double u, double v) {
  return lonlat_to_vec(g.longitude(u), g.latitude(v));
}

/// Continuous ERP coordinates of a (not necessarily unit) vector.
inline std::array<double, 2> vec_to_pixel(const ErpGrid& g, Vec3 d) {
  const double lon = std::atan2(d.x, d.z);
  const double lat = std::atan2(d.y, std::hypot(d.x, d.z));
  double u = g.width() * (lon + std::numbers::pi) / (2.0 * std::numbers::pi) - 0.5;
  u = std::fmod(u, static_cast<double>(g.width()));
  if (u < 0.0) u += g.width();
  if (u >= g.width()) u -= g.width();
  const double v = g.height() * (std::numbers::pi / 2.0 - lat) / std::numbers::pi - 0.5;
  return {u, v};
}

}  // namespace detail

/// Ray through continuous pixel coordinate (u, v).
///
/// Integer coordinates address pixel centers. The accepted domain is
/// u ∈ [−0.5, W) and v ∈ [−0.5, H − 0.5], which reaches both poles and the
/// −π seam; anything else throws ArgumentError.
inline Direction pixel_to_dir(const ErpGrid& grid, double u, double v) {
  if (!(u >= -0.5 && u < grid.width()) || !(v >= -0.5 && v <= grid.height() - 0.5)) {
    throw ArgumentError("pixel_to_dir: (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") outside the " + std::to_string(grid.width()) + "x" +
                        std::to_string(grid.height()) + " grid");
  }
  return Direction(detail::pixel_ray(grid, u, v));
}

/// Inverse of pixel_to_dir. Longitude wraps into [0, W); the poles map to
/// v = −0.5 or v = H − 0.5 with u determined by atan2's sign conventions.
inline std::array<double, 2> dir_to_pixel(const ErpGrid& grid, const Direction& d) {
  return detail::vec_to_pixel(grid, d.vec());
}

/// Latitude-only pixel weights, cos(latitude) normalized to a mean of one.
class DistortionMap {
 public:
  DistortionMap(int width, std::vector<double> row_weights)
      : width_(width), rows_(std::move(row_weights)) {
    if (width_ < 1 || rows_.empty()) throw ArgumentError("DistortionMap: empty");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return static_cast<int>(rows_.size()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(width_) * rows_.size(); }

  double row(int v) const noexcept { return rows_[static_cast<std::size_t>(v)]; }
  double at(int /*col*/, int row) const noexcept { return rows_[static_cast<std::size_t>(row)]; }
  double operator[](std::size_t i) const noexcept { return rows_[i / static_cast<std::size_t>(width_)]; }
  const std::vector<double>& rows() const noexcept { return rows_; }

  Raster<float> to_raster() const {
    Raster<float> r(width_, height());
    for (int v = 0; v < height(); ++v)
      for (int u = 0; u < width_; ++u) r(u, v) = static_cast<float>(rows_[v]);
    return r;
  }

 private:
  int width_;
  std::vector<double> rows_;
};

inline DistortionMap distortion_map(const ErpGrid& grid) {
  std::vector<double> rows(static_cast<std::size_t>(grid.height()));
  double sum = 0.0;
  for (int v = 0; v < grid.height(); ++v) {
    rows[v] = std::cos(grid.latitude(v));
    sum += rows[v];
  }
  const double mean = sum / grid.height();
  for (double& w : rows) w /= mean;
  return DistortionMap(grid.width(), std::move(rows));
}

struct PointCloud {
  Raster<Vec3> points;
  Raster<std::uint8_t> valid;

  int width() const noexcept { return points.width(); }
  int height() const noexcept { return points.height(); }
  std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v;
    return n;
  }
};

/// Per-pixel rays of a grid, row-major. Reused by every ERP-domain loss.
inline Raster<Vec3> ray_table(const ErpGrid& grid) {
  Raster<Vec3> rays(grid.width(), grid.height());
  for (int v = 0; v < grid.height(); ++v)
    for (int u = 0; u < grid.width(); ++u) rays(u, v) = detail::pixel_ray(grid, u, v);
  return rays;
}

template <std::floating_point T>
PointCloud backproject(const BasicDepthMap<T>& depth) {
  const auto grid = ErpGrid::of(depth);
  PointCloud pc{Raster<Vec3>(grid.width(), grid.height()), depth.valid()};
  for (int v = 0; v < grid.height(); ++v) {
    for (int u = 0; u < grid.width(); ++u) {
      pc.points(u, v) = static_cast<double>(depth.value(u, v)) * detail::pixel_ray(grid, u, v);
    }
  }
  return pc;
}

struct NormalMap {
  Raster<Vec3> normals;
  Raster<std::uint8_t> valid;

  int width() const noexcept { return normals.width(); }
  int height() const noexcept { return normals.height(); }
};

namespace detail {

/// Finite-difference stencil of one pixel: the horizontal tangent is
/// P[right] − P[left] (wrapping across the seam); the vertical tangent is
/// Σ coef[k] · P[rows[k]] in the same column, central in the interior and
/// second-order one-sided on the first and last rows.
struct NormalStencil {
  int left;
  int right;
  std::array<int, 3> rows;
  std::array<double, 3> coef;
  int terms;
};

inline NormalStencil normal_stencil(int u, int v, int width, int height) {
  NormalStencil s{};
  s.left = (u + width - 1) % width;
  s.right = (u + 1) % width;
  if (v == 0) {
    s.rows = {0, 1, 2};
    s.coef = {-1.5, 2.0, -0.5};
    s.terms = 3;
  } else if (v == height - 1) {
    s.rows = {v, v - 1, v - 2};
    s.coef = {1.5, -2.0, 0.5};
    s.terms = 3;
  } else {
    s.rows = {v - 1, v + 1, 0};
    s.coef = {-1.0, 1.0, 0.0};
    s.terms = 2;
  }
  return s;
}

/// Intermediate quantities of one pixel's normal, kept for the backward pass.
struct NormalSample {
  Vec3 tu;
  Vec3 tv;
  Vec3 c;        // tu × tv
  double c_norm;
  double sign;   // +1 or −1 so that the normal faces the camera
  Vec3 n;
  bool valid;
};

template <typename PointAt, typename ValidAt>
NormalSample normal_sample(int u, int v, int width, int height, Vec3 ray, PointAt&& point,
                           ValidAt&& valid) {
  NormalSample out{};
  const auto s = normal_stencil(u, v, width, height);
  if (!valid(u, v) || !valid(s.left, v) || !valid(s.right, v)) return out;
  for (int k = 0; k < s.terms; ++k)
    if (!valid(u, s.rows[k])) return out;
  out.tu = point(s.right, v) - point(s.left, v);
  for (int k = 0; k < s.terms; ++k) out.tv += s.coef[k] * point(u, s.rows[k]);
  out.c = cross(out.tu, out.tv);
  out.c_norm = norm(out.c);
  const double scale = norm(out.tu) * norm(out.tv);
  if (!(out.c_norm > 1e-12 * scale) || !std::isfinite(out.c_norm)) return out;
  out.sign = dot(out.c, ray) > 0.0 ? -1.0 : 1.0;
  out.n = (out.sign / out.c_norm) * out.c;
  out.valid = true;
  return out;
}

}  // namespace detail

/// Unit normals of the back-projected surface, oriented towards the camera.
/// Pixels whose stencil touches an invalid point, or whose tangents are
/// parallel, are invalid.
template <std::floating_point T>
NormalMap normals_from_depth(const BasicDepthMap<T>& depth) {
  if (depth.width() < 3 || depth.height() < 3) {
    throw ArgumentError("normals_from_depth: need at least a 3x3 map");
  }
  const auto pc = backproject(depth);
  const int w = depth.width();
  const int h = depth.height();
  const auto grid = ErpGrid::of(depth);
  NormalMap nm{Raster<Vec3>(w, h), Raster<std::uint8_t>(w, h, 0)};
  auto point = [&](int u, int v) { return pc.points(u, v); };
  auto valid = [&](int u, int v) { return pc.valid(u, v) != 0; };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const auto s = detail::normal_sample(u, v, w, h, detail::pixel_ray(grid, u, v), point, valid);
      if (s.valid) {
        nm.normals(u, v) = s.n;
        nm.valid(u, v) = 1;
      }
    }
  }
  return nm;
}

}  // namespace panodepth
