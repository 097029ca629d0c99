#pragma once

#include <cmath>
#include <string>

#include "panodepth/losses/common.hpp"

namespace panodepth {

/// Variance-focus constant of the scale-invariant log loss.
inline constexpr double kSilogLambda = 0.85;

namespace detail {

/// SILog restricted to the pixels accepted by `include`:
///   d = ln pred − ln gt,  value = E[d²] − λ E[d]².
/// Throws EmptyOverlapError when nothing is accepted and `allow_empty` is false.
template <std::floating_point T, typename Include>
LossResult silog_over(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt,
                      const DistortionMap* weights, double lambda, Include&& include,
                      bool allow_empty, const char* context) {
  require_same_shape(pred.values(), gt.values(), context);
  const PixelWeights w(weights);
  w.check(pred.values(), context);

  LossResult r{0.0, Raster<double>(pred.width(), pred.height(), 0.0), 0};
  double sw = 0.0, sd = 0.0, sdd = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.is_valid(i) || !gt.is_valid(i) || !include(i)) continue;
    const double p = pred.value(i);
    const double g = gt.value(i);
    if (!(p > 0.0) || !(g > 0.0)) {
      throw DomainError(std::string(context) + ": non-positive depth at valid pixel " +
                        std::to_string(i));
    }
    const double d = std::log(p) - std::log(g);
    sw += w[i];
    sd += w[i] * d;
    sdd += w[i] * d * d;
    ++r.count;
  }
  if (r.count == 0) {
    if (allow_empty) return r;
    throw EmptyOverlapError(std::string(context) + ": no jointly valid pixels");
  }
  const double mean_d = sd / sw;
  r.value = sdd / sw - lambda * mean_d * mean_d;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.is_valid(i) || !gt.is_valid(i) || !include(i)) continue;
    const double d = std::log(static_cast<double>(pred.value(i))) - std::log(static_cast<double>(gt.value(i)));
    r.gradient[i] = w[i] / sw * (2.0 * d - 2.0 * lambda * mean_d) / static_cast<double>(pred.value(i));
  }
  return r;
}

}  // namespace detail

template <std::floating_point T>
LossResult silog(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt,
                 const DistortionMap* weights = nullptr, double lambda = kSilogLambda) {
  return detail::silog_over(pred, gt, weights, lambda, [](std::size_t) { return true; }, false,
                            "silog");
}

}  // namespace panodepth
