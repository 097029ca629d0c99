#pragma once

#include <vector>

#include "panodepth/losses/common.hpp"

namespace panodepth {

/// Mean L1 distance between predicted and ground-truth unit normals.
///
/// The gradient is exact for the discrete normal operator of
/// normals_from_depth, holding the camera-facing orientation sign fixed.
template <std::floating_point T>
LossResult normal_loss(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt,
                       const DistortionMap* weights = nullptr) {
  require_same_shape(pred.values(), gt.values(), "normal_loss");
  if (pred.width() < 3 || pred.height() < 3) throw ArgumentError("normal_loss: need at least a 3x3 map");
  const detail::PixelWeights w(weights);
  w.check(pred.values(), "normal_loss");

  const int W = pred.width();
  const int H = pred.height();
  const auto rays = ray_table(ErpGrid::of(pred));
  const auto pc_pred = backproject(pred);
  const auto nm_gt = normals_from_depth(gt);

  std::vector<detail::NormalSample> samples(pred.size());
  auto point = [&](int u, int v) { return pc_pred.points(u, v); };
  auto valid = [&](int u, int v) { return pc_pred.valid(u, v) != 0; };

  LossResult r{0.0, Raster<double>(W, H, 0.0), 0};
  double sw = 0.0;
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      const std::size_t i = rays.index(u, v);
      samples[i] = detail::normal_sample(u, v, W, H, rays[i], point, valid);
      if (!samples[i].valid || !nm_gt.valid[i]) {
        samples[i].valid = false;
        continue;
      }
      sw += w[i];
      r.value += w[i] * norm1(samples[i].n - nm_gt.normals[i]);
      ++r.count;
    }
  }
  if (r.count == 0) throw EmptyOverlapError("normal_loss: no jointly valid normals");
  r.value /= sw;

  Raster<Vec3> g_points(W, H, Vec3{});
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      const std::size_t i = rays.index(u, v);
      const auto& s = samples[i];
      if (!s.valid) continue;
      const Vec3 diff = s.n - nm_gt.normals[i];
      const Vec3 g_n = (w[i] / sw) * Vec3{detail::sign(diff.x), detail::sign(diff.y), detail::sign(diff.z)};
      // n = sign · c/|c|  ⇒  ∂n/∂c = sign (I − ĉĉᵀ)/|c|
      const Vec3 c_hat = s.c / s.c_norm;
      const Vec3 g_c = (s.sign / s.c_norm) * (g_n - dot(c_hat, g_n) * c_hat);
      const Vec3 g_tu = cross(s.tv, g_c);
      const Vec3 g_tv = cross(g_c, s.tu);
      const auto st = detail::normal_stencil(u, v, W, H);
      g_points(st.right, v) += g_tu;
      g_points(st.left, v) -= g_tu;
      for (int k = 0; k < st.terms; ++k) g_points(u, st.rows[k]) += st.coef[k] * g_tv;
    }
  }
  for (std::size_t i = 0; i < r.gradient.size(); ++i) r.gradient[i] = dot(g_points[i], rays[i]);
  return r;
}

}  // namespace panodepth
