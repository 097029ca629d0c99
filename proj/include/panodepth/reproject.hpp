#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "panodepth/core.hpp"
#include "panodepth/error.hpp"
#include "panodepth/geometry.hpp"

namespace panodepth {

/// Square pinhole camera at the sphere center.
class PerspectiveCamera {
 public:
  PerspectiveCamera(Direction forward, Direction up, double fov_deg, int size)
      : forward_(forward), up_(up), fov_deg_(fov_deg), size_(size) {
    if (std::abs(dot(forward.vec(), up.vec())) > 1e-6) {
      throw ArgumentError("PerspectiveCamera: up is not orthogonal to forward");
    }
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
      throw ArgumentError("PerspectiveCamera: fov must lie in (0, 180) degrees");
    }
    if (size < 2) throw ArgumentError("PerspectiveCamera: size must be >= 2");
  }

  const Direction& forward() const noexcept { return forward_; }
  const Direction& up() const noexcept { return up_; }
  Vec3 right() const noexcept { return cross(up_.vec(), forward_.vec()); }
  double fov_deg() const noexcept { return fov_deg_; }
  int size() const noexcept { return size_; }
  double half_extent() const noexcept {
    return std::tan(fov_deg_ * std::numbers::pi / 360.0);
  }

  /// Unnormalized ray through the center of patch pixel (a, b); b grows downwards.
  Vec3 ray(int a, int b) const noexcept {
    const double t = half_extent();
    const double x = (2.0 * (a + 0.5) / size_ - 1.0) * t;
    const double y = (1.0 - 2.0 * (b + 0.5) / size_) * t;
    return forward_.vec() + x * right() + y * up_.vec();
  }

  bool contains(Vec3 d) const noexcept {
    const double z = dot(d, forward_.vec());
    if (!(z > 0.0)) return false;
    const double t = half_extent() * z;
    return std::abs(dot(d, right())) <= t && std::abs(dot(d, up_.vec())) <= t;
  }

 private:
  Direction forward_;
  Direction up_;
  double fov_deg_;
  int size_;
};

/// Smallest square-frustum fov whose inscribed cone reaches the icosahedron's
/// covering radius (vertex to face-center angle, ≈ 37.377°).
inline double icosahedron_covering_radius_deg() {
  const double phi = std::numbers::phi;
  const Vec3 a = normalized({0.0, 1.0, phi});
  const Vec3 b = normalized({0.0, -1.0, phi});
  const Vec3 c = normalized({phi, 0.0, 1.0});
  const Vec3 center = normalized(a + b + c);
  return std::acos(std::clamp(dot(a, center), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

inline constexpr double kMinCoverageFovDeg = 75.0;

class IcosahedronRig {
 public:
  explicit IcosahedronRig(std::vector<PerspectiveCamera> cameras) : cameras_(std::move(cameras)) {
    if (cameras_.size() != 12) throw ArgumentError("IcosahedronRig: exactly 12 cameras required");
  }

  std::span<const PerspectiveCamera> cameras() const& noexcept { return cameras_; }
  std::vector<PerspectiveCamera> cameras() && { return std::move(cameras_); }
  const PerspectiveCamera& operator[](std::size_t k) const noexcept { return cameras_[k]; }
  std::size_t size() const noexcept { return cameras_.size(); }
  double fov_deg() const noexcept { return cameras_.front().fov_deg(); }
  int patch_size() const noexcept { return cameras_.front().size(); }

 private:
  std::vector<PerspectiveCamera> cameras_;
};

/// The 12 unit icosahedron vertices: cyclic permutations of (0, ±1, ±φ).
inline std::array<Vec3, 12> icosahedron_vertices() {
  const double g = std::numbers::phi;
  std::array<Vec3, 12> out{};
  int k = 0;
  for (double s1 : {1.0, -1.0}) {
    for (double s2 : {1.0, -1.0}) {
      out[k] = normalized({0.0, s1, s2 * g});
      out[k + 4] = normalized({s1, s2 * g, 0.0});
      out[k + 8] = normalized({s2 * g, 0.0, s1});
      ++k;
    }
  }
  return out;
}

/// Global +y projected onto the plane orthogonal to the axis; +z when the
/// axis is within ~2.6° of a pole.
inline Direction camera_up_for(const Direction& forward) {
  const Vec3 f = forward.vec();
  Vec3 ref{0.0, 1.0, 0.0};
  if (std::abs(f.y) > 0.999) ref = {0.0, 0.0, 1.0};
  return Direction(ref - dot(ref, f) * f);
}

inline IcosahedronRig icosahedron_rig(double fov_deg = 90.0, int size = 128, bool allow_gaps = false) {
  if (!allow_gaps && fov_deg < kMinCoverageFovDeg) {
    throw CoverageError("icosahedron_rig: fov " + std::to_string(fov_deg) +
                        "° leaves gaps on the sphere (needs >= 75°); pass allow_gaps to override");
  }
  std::vector<PerspectiveCamera> cams;
  cams.reserve(12);
  for (const Vec3& axis : icosahedron_vertices()) {
    const Direction f(axis);
    cams.emplace_back(f, camera_up_for(f), fov_deg, size);
  }
  return IcosahedronRig(std::move(cams));
}

/// Bilinear taps of one patch pixel into the ERP map.
struct BilinearTap {
  std::array<std::uint32_t, 4> index;
  std::array<double, 4> weight;
};

/// Precomputed linear sampling operator ERP → patch for one camera.
/// Columns wrap across the seam; rows are clamped at the poles.
class SamplingPlan {
 public:
  SamplingPlan(const PerspectiveCamera& cam, const ErpGrid& grid)
      : grid_(grid), size_(cam.size()), taps_(static_cast<std::size_t>(size_) * size_) {
    const int w = grid.width();
    const int h = grid.height();
    for (int b = 0; b < size_; ++b) {
      for (int a = 0; a < size_; ++a) {
        const auto [u, v] = detail::vec_to_pixel(grid, cam.ray(a, b));
        const double u0 = std::floor(u);
        const double v0 = std::floor(v);
        const double fu = u - u0;
        const double fv = v - v0;
        const int c0 = static_cast<int>(u0) % w;
        const int c1 = (c0 + 1) % w;
        const int r0 = std::clamp(static_cast<int>(v0), 0, h - 1);
        const int r1 = std::clamp(static_cast<int>(v0) + 1, 0, h - 1);
        auto idx = [w](int c, int r) { return static_cast<std::uint32_t>(r * w + c); };
        taps_[static_cast<std::size_t>(b) * size_ + a] = BilinearTap{
            {idx(c0, r0), idx(c1, r0), idx(c0, r1), idx(c1, r1)},
            {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv}};
      }
    }
  }

  const ErpGrid& grid() const noexcept { return grid_; }
  int size() const noexcept { return size_; }
  std::span<const BilinearTap> taps() const noexcept { return taps_; }

  /// y = S x over raw values, ignoring validity.
  template <typename In>
  std::vector<double> apply(std::span<const In> erp) const {
    std::vector<double> out(taps_.size());
    for (std::size_t p = 0; p < taps_.size(); ++p) {
      const auto& t = taps_[p];
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += t.weight[k] * static_cast<double>(erp[t.index[k]]);
      out[p] = acc;
    }
    return out;
  }

  /// x += Sᵀ y.
  void apply_adjoint(std::span<const double> patch, std::span<double> erp) const {
    for (std::size_t p = 0; p < taps_.size(); ++p) {
      const double g = patch[p];
      if (g == 0.0) continue;
      const auto& t = taps_[p];
      for (int k = 0; k < 4; ++k) erp[t.index[k]] += t.weight[k] * g;
    }
  }

  /// Patch validity: true only where all four source pixels are valid.
  std::vector<std::uint8_t> validity(std::span<const std::uint8_t> erp_valid) const {
    std::vector<std::uint8_t> out(taps_.size());
    for (std::size_t p = 0; p < taps_.size(); ++p) {
      const auto& t = taps_[p];
      out[p] = erp_valid[t.index[0]] && erp_valid[t.index[1]] && erp_valid[t.index[2]] &&
               erp_valid[t.index[3]];
    }
    return out;
  }

 private:
  ErpGrid grid_;
  int size_;
  std::vector<BilinearTap> taps_;
};

struct PerspectivePatch {
  Raster<double> values;
  Raster<std::uint8_t> valid;
  PerspectiveCamera camera;

  /// Float depth map view of the patch; invalid pixels carry 0.
  DepthMap to_depth_map() const {
    Raster<float> v(values.width(), values.height());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = valid[i] ? static_cast<float>(values[i]) : 0.0f;
    return DepthMap(std::move(v), valid);
  }
};

template <std::floating_point T>
PerspectivePatch erp_to_perspective(const BasicDepthMap<T>& map, const PerspectiveCamera& cam) {
  const SamplingPlan plan(cam, ErpGrid::of(map));
  const int s = cam.size();
  auto values = plan.apply(map.values().data());
  auto valid = plan.validity(map.valid().data());
  return PerspectivePatch{Raster<double>(s, s, std::move(values)),
                          Raster<std::uint8_t>(s, s, std::move(valid)), cam};
}

/// Transpose of the sampling operator: scatters patch gradients onto the ERP grid.
inline Raster<double> erp_to_perspective_adjoint(const Raster<double>& patch_grad,
                                                 const PerspectiveCamera& cam, const ErpGrid& grid) {
  if (patch_grad.width() != cam.size() || patch_grad.height() != cam.size()) {
    throw ArgumentError("erp_to_perspective_adjoint: gradient size does not match the camera");
  }
  const SamplingPlan plan(cam, grid);
  Raster<double> out(grid.width(), grid.height(), 0.0);
  plan.apply_adjoint(patch_grad.data(), out.data());
  return out;
}

/// Fraction of ERP pixel-center directions inside at least one frustum.
inline double coverage_check(std::span<const PerspectiveCamera> cameras, const ErpGrid& grid) {
  std::size_t inside = 0;
  for (int v = 0; v < grid.height(); ++v) {
    for (int u = 0; u < grid.width(); ++u) {
      const Vec3 d = detail::pixel_ray(grid, u, v);
      for (const auto& cam : cameras) {
        if (cam.contains(d)) {
          ++inside;
          break;
        }
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(grid.size());
}

inline double coverage_check(const IcosahedronRig& rig, const ErpGrid& grid) {
  return coverage_check(rig.cameras(), grid);
}

}  // namespace panodepth
