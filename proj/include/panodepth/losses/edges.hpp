#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "panodepth/losses/common.hpp"
#include "panodepth/losses/silog.hpp"

namespace panodepth {

inline constexpr double kDefaultSobelPercentile = 90.0;

struct EdgeMask {
  Raster<std::uint8_t> mask;
  double percentile = kDefaultSobelPercentile;
  double threshold = 0.0;  // magnitude cut; pixels at or above it (and > 0) are edges

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto m : mask.data()) n += m;
    return n;
  }
};

/// Linear-interpolated percentile (p in [0, 100]) of an unsorted sample.
inline double percentile_of(std::vector<double> xs, double p) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const double pos = p / 100.0 * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// Sobel magnitude of ln(gt); columns wrap, rows clamp. Pixels whose 3×3
/// neighborhood has an invalid sample get no magnitude (negative value).
template <std::floating_point T>
Raster<double> sobel_log_magnitude(const BasicDepthMap<T>& gt) {
  const int w = gt.width();
  const int h = gt.height();
  Raster<double> mag(w, h, -1.0);
  auto L = [&](int u, int v) { return std::log(static_cast<double>(gt.value(u, v))); };
  for (int v = 0; v < h; ++v) {
    const int rows[3] = {std::max(v - 1, 0), v, std::min(v + 1, h - 1)};
    for (int u = 0; u < w; ++u) {
      const int cols[3] = {(u + w - 1) % w, u, (u + 1) % w};
      bool ok = true;
      for (int r : rows)
        for (int c : cols) ok = ok && gt.is_valid(c, r);
      if (!ok) continue;
      static constexpr double kSmooth[3] = {1.0, 2.0, 1.0};
      double gx = 0.0, gy = 0.0;
      for (int k = 0; k < 3; ++k) {
        gx += kSmooth[k] * (L(cols[2], rows[k]) - L(cols[0], rows[k]));
        gy += kSmooth[k] * (L(cols[k], rows[2]) - L(cols[k], rows[0]));
      }
      mag(u, v) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return mag;
}

template <std::floating_point T>
EdgeMask sobel_edge_mask(const BasicDepthMap<T>& gt, double percentile = kDefaultSobelPercentile) {
  if (!(percentile > 0.0 && percentile < 100.0)) {
    throw ArgumentError("sobel_edge_mask: percentile must lie in (0, 100)");
  }
  if (gt.width() < 3 || gt.height() < 3) throw ArgumentError("sobel_edge_mask: need at least a 3x3 map");
  const auto mag = sobel_log_magnitude(gt);
  std::vector<double> sample;
  for (double m : mag.data())
    if (m >= 0.0) sample.push_back(m);
  EdgeMask out{Raster<std::uint8_t>(gt.width(), gt.height(), 0), percentile, 0.0};
  if (sample.empty()) return out;
  out.threshold = percentile_of(std::move(sample), percentile);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    out.mask[i] = mag[i] > 0.0 && mag[i] >= out.threshold;
  }
  return out;
}

/// SILog over edge pixels only; an empty edge set yields zero.
template <std::floating_point T>
LossResult grad_loss(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt, const EdgeMask& edge,
                     const DistortionMap* weights = nullptr, double lambda = kSilogLambda) {
  require_same_shape(pred.values(), edge.mask, "grad_loss");
  return detail::silog_over(pred, gt, weights, lambda,
                            [&](std::size_t i) { return edge.mask[i] != 0; }, true, "grad_loss");
}

}  // namespace panodepth
