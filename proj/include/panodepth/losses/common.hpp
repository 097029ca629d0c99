#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "panodepth/core.hpp"
#include "panodepth/geometry.hpp"
#include "panodepth/raster.hpp"

namespace panodepth {

/// Scalar loss value with its gradient w.r.t. the predicted array.
struct LossResult {
  double value = 0.0;
  Raster<double> gradient;
  std::size_t count = 0;  // pixels (or patch pixels) that contributed
};

namespace detail {

/// Optional per-pixel weights; absent means uniform.
class PixelWeights {
 public:
  explicit PixelWeights(const DistortionMap* map) : map_(map) {}
  double operator[](std::size_t i) const noexcept { return map_ ? (*map_)[i] : 1.0; }

  template <typename T>
  void check(const Raster<T>& r, const char* context) const {
    if (map_ && (map_->width() != r.width() || map_->height() != r.height())) {
      throw ArgumentError(std::string(context) + ": distortion map shape does not match");
    }
  }

 private:
  const DistortionMap* map_;
};

inline double sign(double x) noexcept { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

}  // namespace panodepth
