#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "panodepth/core.hpp"
#include "panodepth/random.hpp"

namespace testutil {

namespace fs = std::filesystem;

template <typename T = double>
panodepth::BasicDepthMap<T> random_depth(int w, int h, std::uint64_t seed, double lo = 0.5, double hi = 50.0,
                                         double invalid_fraction = 0.0) {
  panodepth::Rng rng(seed);
  panodepth::Raster<T> v(w, h);
  panodepth::Raster<std::uint8_t> ok(w, h, 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<T>(rng.uniform(lo, hi));
    if (invalid_fraction > 0.0 && rng.uniform() < invalid_fraction) ok[i] = 0;
  }
  return panodepth::BasicDepthMap<T>(std::move(v), std::move(ok));
}

/// Fresh, empty scratch directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("panodepth_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace testutil
