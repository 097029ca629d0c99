#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "panodepth/error.hpp"
#include "panodepth/raster.hpp"

namespace panodepth {

/// Metric depth in meters on an H×W grid, with an explicit validity mask.
///
/// Every valid pixel holds a finite depth > 0. The value stored at an invalid
/// pixel is carried along but never read by losses or metrics.
template <std::floating_point T>
class BasicDepthMap {
 public:
  using scalar_type = T;

  BasicDepthMap() = default;

  BasicDepthMap(Raster<T> values, Raster<std::uint8_t> valid)
      : values_(std::move(values)), valid_(std::move(valid)) {
    require_same_shape(values_, valid_, "DepthMap");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (valid_[i] > 1) throw ArgumentError("DepthMap: validity entries must be 0 or 1");
      if (valid_[i] && !(std::isfinite(values_[i]) && values_[i] > T(0))) {
        throw ArgumentError("DepthMap: valid pixel " + std::to_string(i) +
                            " has non-positive or non-finite depth");
      }
    }
  }

  /// Validity inferred from the values: finite and strictly positive.
  static BasicDepthMap from_values(Raster<T> values) {
    Raster<std::uint8_t> valid(values.width(), values.height(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      valid[i] = std::isfinite(values[i]) && values[i] > T(0);
    }
    return BasicDepthMap(std::move(values), std::move(valid));
  }

  static BasicDepthMap from_values(int width, int height, std::vector<T> values) {
    return from_values(Raster<T>(width, height, std::move(values)));
  }

  static BasicDepthMap constant(int width, int height, T depth) {
    return from_values(Raster<T>(width, height, depth));
  }

  int width() const noexcept { return values_.width(); }
  int height() const noexcept { return values_.height(); }
  std::size_t size() const noexcept { return values_.size(); }

  const Raster<T>& values() const noexcept { return values_; }
  const Raster<std::uint8_t>& valid() const noexcept { return valid_; }

  T value(std::size_t i) const noexcept { return values_[i]; }
  T value(int col, int row) const noexcept { return values_(col, row); }
  bool is_valid(std::size_t i) const noexcept { return valid_[i] != 0; }
  bool is_valid(int col, int row) const noexcept { return valid_(col, row) != 0; }

  std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (auto v : valid_.data()) n += v;
    return n;
  }

  template <std::floating_point U>
  BasicDepthMap<U> cast() const {
    Raster<U> out(width(), height());
    for (std::size_t i = 0; i < size(); ++i) out[i] = static_cast<U>(values_[i]);
    return BasicDepthMap<U>(std::move(out), valid_);
  }

  friend bool operator==(const BasicDepthMap&, const BasicDepthMap&) = default;

 private:
  Raster<T> values_;
  Raster<std::uint8_t> valid_;
};

using DepthMap = BasicDepthMap<float>;

/// Per-pixel mask in [0, 1]. Network outputs are soft; ground truth is hard.
class BinaryMask {
 public:
  BinaryMask() = default;

  explicit BinaryMask(Raster<float> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const float m = values_[i];
      if (!(m >= 0.0f && m <= 1.0f)) {
        throw ArgumentError("BinaryMask: entry " + std::to_string(i) + " outside [0,1]");
      }
    }
  }

  BinaryMask(int width, int height, std::vector<float> values)
      : BinaryMask(Raster<float>(width, height, std::move(values))) {}

  int width() const noexcept { return values_.width(); }
  int height() const noexcept { return values_.height(); }
  std::size_t size() const noexcept { return values_.size(); }
  const Raster<float>& values() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  bool is_hard() const noexcept {
    for (float m : values_.data()) {
      if (m != 0.0f && m != 1.0f) return false;
    }
    return true;
  }

  std::size_t count_ones() const noexcept {
    std::size_t n = 0;
    for (float m : values_.data()) n += (m > 0.5f);
    return n;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Raster<float> values_;
};

/// Distance threshold in meters used by the range-mask heads.
class RangeThreshold {
 public:
  explicit RangeThreshold(double meters) : meters_(meters) {
    if (!(std::isfinite(meters) && meters > 0.0)) {
      throw ArgumentError("range threshold must be a positive finite distance");
    }
  }

  double meters() const noexcept { return meters_; }

 private:
  double meters_;
};

/// The four head thresholds, in meters.
inline constexpr double kRangePresets[] = {10.0, 20.0, 50.0, 100.0};

template <std::floating_point T>
BinaryMask gt_range_mask(const BasicDepthMap<T>& depth, RangeThreshold t) {
  Raster<float> out(depth.width(), depth.height(), 0.0f);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth.is_valid(i) && static_cast<double>(depth.value(i)) <= t.meters()) out[i] = 1.0f;
  }
  return BinaryMask(std::move(out));
}

/// Element-wise product; pixels whose mask is below one half become invalid.
template <std::floating_point T>
BasicDepthMap<T> apply_range_mask(const BasicDepthMap<T>& depth, const BinaryMask& mask) {
  require_same_shape(depth.values(), mask.values(), "apply_range_mask");
  Raster<T> values(depth.width(), depth.height());
  Raster<std::uint8_t> valid(depth.width(), depth.height(), 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    values[i] = depth.value(i) * static_cast<T>(mask[i]);
    valid[i] = depth.is_valid(i) && mask[i] > 0.5f;
  }
  return BasicDepthMap<T>(std::move(values), std::move(valid));
}

}  // namespace panodepth
