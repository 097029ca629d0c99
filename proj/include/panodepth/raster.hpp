#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "panodepth/error.hpp"

namespace panodepth {

/// Dense row-major H×W array. Column index first in accessors, matching
/// (u, v) image coordinates.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;

  Raster(int width, int height, T fill = T{})
      : width_(checked(width, "width")), height_(checked(height, "height")),
        data_(static_cast<std::size_t>(width_) * height_, fill) {}

  Raster(int width, int height, std::vector<T> data)
      : width_(checked(width, "width")), height_(checked(height, "height")),
        data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width_) * height_) {
      throw ArgumentError("raster payload has " + std::to_string(data_.size()) +
                          " elements, expected " +
                          std::to_string(static_cast<std::size_t>(width_) * height_));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int col, int row) const noexcept {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  T& operator()(int col, int row) noexcept { return data_[index(col, row)]; }
  const T& operator()(int col, int row) const noexcept { return data_[index(col, row)]; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static int checked(int n, const char* what) {
    if (n < 1) throw ArgumentError(std::string("raster ") + what + " must be >= 1");
    return n;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
void require_same_shape(const Raster<A>& a, const Raster<B>& b, const char* context) {
  if (!a.same_shape(b)) {
    throw ArgumentError(std::string(context) + ": dimension mismatch (" +
                        std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                        " vs " + std::to_string(b.width()) + "x" +
                        std::to_string(b.height()) + ")");
  }
}

}  // namespace panodepth
