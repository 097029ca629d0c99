#pragma once

#include <cmath>
#include <vector>

#include "panodepth/losses/common.hpp"
#include "panodepth/reproject.hpp"

namespace panodepth {

inline constexpr double kDfNormEpsilon = 1e-6;

namespace detail {

/// Standardizes the valid entries of a patch in place: (x − μ)/(σ + ε), zero
/// elsewhere. Returns σ.
inline double standardize(std::vector<double>& x, const std::vector<std::uint8_t>& valid,
                          std::size_t n, double& mean) {
  double s = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p)
    if (valid[p]) s += x[p];
  mean = s / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p)
    if (valid[p]) ss += (x[p] - mean) * (x[p] - mean);
  const double sigma = std::sqrt(ss / static_cast<double>(n));
  for (std::size_t p = 0; p < x.size(); ++p) x[p] = valid[p] ? (x[p] - mean) / (sigma + kDfNormEpsilon) : 0.0;
  return sigma;
}

/// Backward pass of `standardize`: maps ∂L/∂y to ∂L/∂x given y, σ.
inline std::vector<double> standardize_backward(const std::vector<double>& g,
                                                const std::vector<double>& y,
                                                const std::vector<std::uint8_t>& valid,
                                                std::size_t n, double sigma) {
  const double s = sigma + kDfNormEpsilon;
  double g_mean = 0.0, gy = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!valid[p]) continue;
    g_mean += g[p];
    gy += g[p] * y[p];
  }
  g_mean /= static_cast<double>(n);
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!valid[p]) continue;
    double v = g[p] - g_mean;
    // y·s = x − μ; dσ/dx_q = (x_q − μ)/(nσ)
    if (sigma > 0.0) v -= gy * (y[p] * s) / (static_cast<double>(n) * sigma);
    out[p] = v / s;
  }
  return out;
}

/// G = Y Yᵀ for a row-major P×P matrix Y.
inline std::vector<double> gram(const std::vector<double>& y, int P) {
  std::vector<double> g(static_cast<std::size_t>(P) * P, 0.0);
  for (int i = 0; i < P; ++i) {
    for (int j = i; j < P; ++j) {
      double acc = 0.0;
      for (int k = 0; k < P; ++k) acc += y[i * P + k] * y[j * P + k];
      g[i * P + j] = acc;
      g[j * P + i] = acc;
    }
  }
  return g;
}

}  // namespace detail

/// Dense-fidelity Gram loss over a camera rig, with sampling plans cached for
/// one ERP grid.
class DfGramLoss {
 public:
  DfGramLoss(const IcosahedronRig& rig, const ErpGrid& grid) : grid_(grid) {
    if (rig.fov_deg() < kMinCoverageFovDeg) {
      throw CoverageError("df_gram: rig fov below the sphere-coverage minimum");
    }
    plans_.reserve(rig.size());
    for (const auto& cam : rig.cameras()) plans_.emplace_back(cam, grid);
  }

  const ErpGrid& grid() const noexcept { return grid_; }

  template <std::floating_point T>
  LossResult operator()(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt) const {
    require_same_shape(pred.values(), gt.values(), "df_gram");
    if (pred.width() != grid_.width() || pred.height() != grid_.height()) {
      throw ArgumentError("df_gram: map shape does not match the sampling grid");
    }
    LossResult r{0.0, Raster<double>(pred.width(), pred.height(), 0.0), 0};
    std::size_t views = 0;
    for (const auto& plan : plans_) {
      const int P = plan.size();
      auto valid = plan.validity(pred.valid().data());
      const auto valid_gt = plan.validity(gt.valid().data());
      std::size_t n = 0;
      for (std::size_t p = 0; p < valid.size(); ++p) {
        valid[p] = valid[p] && valid_gt[p];
        n += valid[p];
      }
      if (n < 2) continue;

      auto yp = plan.apply(pred.values().data());
      auto yg = plan.apply(gt.values().data());
      double mean_p = 0.0, mean_g = 0.0;
      const double sigma_p = detail::standardize(yp, valid, n, mean_p);
      detail::standardize(yg, valid, n, mean_g);

      const auto gp = detail::gram(yp, P);
      const auto gg = detail::gram(yg, P);
      const double P2 = static_cast<double>(P) * P;
      std::vector<double> diff(gp.size());
      double term = 0.0;
      for (std::size_t i = 0; i < gp.size(); ++i) {
        diff[i] = gp[i] - gg[i];
        term += diff[i] * diff[i];
      }
      r.value += term / P2;

      // ∂/∂Y = 4 (Gp − Gg) Y / P²
      std::vector<double> gy(yp.size(), 0.0);
      for (int i = 0; i < P; ++i) {
        for (int k = 0; k < P; ++k) {
          double acc = 0.0;
          for (int j = 0; j < P; ++j) acc += diff[i * P + j] * yp[j * P + k];
          gy[i * P + k] = 4.0 * acc / P2;
        }
      }
      const auto gx = detail::standardize_backward(gy, yp, valid, n, sigma_p);
      plan.apply_adjoint(gx, r.gradient.data());
      r.count += n;
      ++views;
    }
    if (views > 0) {
      r.value /= static_cast<double>(views);
      for (double& g : r.gradient.data()) g /= static_cast<double>(views);
    }
    return r;
  }

 private:
  ErpGrid grid_;
  std::vector<SamplingPlan> plans_;
};

template <std::floating_point T>
LossResult df_gram(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt, const IcosahedronRig& rig) {
  return DfGramLoss(rig, ErpGrid::of(pred))(pred, gt);
}

}  // namespace panodepth
