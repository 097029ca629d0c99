#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "panodepth/core.hpp"
#include "panodepth/error.hpp"
#include "panodepth/geometry.hpp"

namespace panodepth {

struct EvalConfig {
  double min_depth = 0.01;
  std::optional<double> max_depth;  // truncation threshold, meters
  bool latitude_weighted = false;

  void validate() const {
    if (!(std::isfinite(min_depth) && min_depth > 0.0)) throw ArgumentError("min_depth must be positive");
    if (max_depth && !(*max_depth > min_depth)) throw ArgumentError("max_depth must exceed min_depth");
  }
};

/// Weighted sums that determine a report; pooling them across images gives
/// the pixel-pooled aggregate.
struct MetricSums {
  double weight = 0.0;
  double abs_rel = 0.0;
  double sq_err = 0.0;
  double delta[3] = {0.0, 0.0, 0.0};
};

struct MetricsReport {
  double abs_rel = 0.0;
  double rmse = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t n_valid = 0;
  std::size_t n_images = 1;
  bool aggregated = false;
  MetricSums sums;

  static MetricsReport from_sums(const MetricSums& s, std::size_t n_valid) {
    MetricsReport r;
    r.sums = s;
    r.n_valid = n_valid;
    r.abs_rel = s.abs_rel / s.weight;
    r.rmse = std::sqrt(s.sq_err / s.weight);
    r.delta1 = s.delta[0] / s.weight;
    r.delta2 = s.delta[1] / s.weight;
    r.delta3 = s.delta[2] / s.weight;
    return r;
  }
};

inline constexpr double kDeltaBase = 1.25;

/// Metric-depth evaluation over pixels with valid gt inside
/// [min_depth, max_depth] and a valid prediction. No scale alignment.
template <std::floating_point T>
MetricsReport evaluate(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt, const EvalConfig& cfg = {}) {
  cfg.validate();
  require_same_shape(pred.values(), gt.values(), "evaluate");
  std::optional<DistortionMap> dmap;
  if (cfg.latitude_weighted) dmap = distortion_map(ErpGrid::of(gt));

  const double thresholds[3] = {kDeltaBase, kDeltaBase * kDeltaBase, kDeltaBase * kDeltaBase * kDeltaBase};
  MetricSums s;
  std::size_t n_gt = 0, n_min = 0, n_max = 0, n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.is_valid(i)) continue;
    ++n_gt;
    const double g = gt.value(i);
    if (g < cfg.min_depth) continue;
    ++n_min;
    if (cfg.max_depth && g > *cfg.max_depth) continue;
    ++n_max;
    if (!pred.is_valid(i)) continue;
    ++n;
    const double p = pred.value(i);
    const double w = dmap ? (*dmap)[i] : 1.0;
    s.weight += w;
    s.abs_rel += w * std::abs(p - g) / g;
    s.sq_err += w * (p - g) * (p - g);
    const double ratio = std::max(p / g, g / p);
    for (int k = 0; k < 3; ++k) s.delta[k] += ratio < thresholds[k] ? w : 0.0;
  }
  if (n == 0) {
    std::string filter = n_gt == 0    ? "ground-truth validity"
                         : n_min == 0 ? "min_depth"
                         : n_max == 0 ? "max_depth truncation"
                                      : "prediction validity";
    throw EmptyOverlapError("evaluate: no pixels left after the " + filter + " filter");
  }
  return MetricsReport::from_sums(s, n);
}

enum class Aggregation { kMeanOfImages, kPixelPooled };

inline std::string_view to_string(Aggregation a) {
  return a == Aggregation::kMeanOfImages ? "mean_of_images" : "pixel_pooled";
}

inline Aggregation aggregation_from_string(std::string_view s) {
  if (s == "mean_of_images" || s == "mean") return Aggregation::kMeanOfImages;
  if (s == "pixel_pooled" || s == "pooled") return Aggregation::kPixelPooled;
  throw ArgumentError("unknown aggregation mode '" + std::string(s) + "'");
}

inline MetricsReport aggregate(std::span<const MetricsReport> reports,
                               Aggregation mode = Aggregation::kMeanOfImages) {
  if (reports.empty()) throw ArgumentError("aggregate: no reports");
  if (reports.size() == 1) return reports.front();
  MetricSums pooled;
  std::size_t n_valid = 0, n_images = 0;
  for (const auto& r : reports) {
    pooled.weight += r.sums.weight;
    pooled.abs_rel += r.sums.abs_rel;
    pooled.sq_err += r.sums.sq_err;
    for (int k = 0; k < 3; ++k) pooled.delta[k] += r.sums.delta[k];
    n_valid += r.n_valid;
    n_images += r.n_images;
  }
  MetricsReport out;
  if (mode == Aggregation::kPixelPooled) {
    out = MetricsReport::from_sums(pooled, n_valid);
  } else {
    const double m = static_cast<double>(reports.size());
    for (const auto& r : reports) {
      out.abs_rel += r.abs_rel / m;
      out.rmse += r.rmse / m;
      out.delta1 += r.delta1 / m;
      out.delta2 += r.delta2 / m;
      out.delta3 += r.delta3 / m;
    }
    out.sums = pooled;
    out.n_valid = n_valid;
  }
  out.n_images = n_images;
  out.aggregated = true;
  return out;
}

}  // namespace panodepth
