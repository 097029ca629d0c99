#pragma once

#include "panodepth/losses/common.hpp"

namespace panodepth {

/// Mean L1 distance between back-projected points. Since both points share a
/// ray r, ‖p·r − g·r‖₁ = |p − g| · ‖r‖₁.
template <std::floating_point T>
LossResult pts_loss(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt,
                    const DistortionMap* weights = nullptr) {
  require_same_shape(pred.values(), gt.values(), "pts_loss");
  const detail::PixelWeights w(weights);
  w.check(pred.values(), "pts_loss");
  const auto rays = ray_table(ErpGrid::of(pred));

  LossResult r{0.0, Raster<double>(pred.width(), pred.height(), 0.0), 0};
  double sw = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.is_valid(i) || !gt.is_valid(i)) continue;
    const double delta = static_cast<double>(pred.value(i)) - static_cast<double>(gt.value(i));
    sw += w[i];
    r.value += w[i] * std::abs(delta) * norm1(rays[i]);
    ++r.count;
  }
  if (r.count == 0) throw EmptyOverlapError("pts_loss: no jointly valid pixels");
  r.value /= sw;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.is_valid(i) || !gt.is_valid(i)) continue;
    const double delta = static_cast<double>(pred.value(i)) - static_cast<double>(gt.value(i));
    r.gradient[i] = w[i] / sw * detail::sign(delta) * norm1(rays[i]);
  }
  return r;
}

}  // namespace panodepth
