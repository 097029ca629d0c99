#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "panodepth/losses/common.hpp"
#include "panodepth/losses/df_gram.hpp"
#include "panodepth/losses/edges.hpp"
#include "panodepth/losses/mask.hpp"
#include "panodepth/losses/normal.hpp"
#include "panodepth/losses/pts.hpp"
#include "panodepth/losses/silog.hpp"

namespace panodepth {

enum class LossTerm { kSilog = 0, kDf, kGrad, kNormal, kPts, kMask };

inline constexpr std::array<std::string_view, 6> kLossTermNames = {"silog", "df", "grad",
                                                                  "normal", "pts", "mask"};

/// Per-term weights λ1..λ6 (SILog, DF, grad, normal, pts, mask).
struct LossWeights {
  std::array<double, 6> lambda = {1.0, 0.4, 5.0, 2.0, 2.0, 2.0};

  double operator[](LossTerm t) const noexcept { return lambda[static_cast<int>(t)]; }

  void validate() const {
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      if (!(std::isfinite(lambda[k]) && lambda[k] >= 0.0)) {
        throw ArgumentError("loss weight '" + std::string(kLossTermNames[k]) +
                            "' must be finite and non-negative");
      }
    }
  }
};

struct LossOptions {
  LossWeights weights;
  double silog_lambda = kSilogLambda;
  double sobel_percentile = kDefaultSobelPercentile;
  double df_fov_deg = 90.0;
  int df_patch_size = 128;
  bool use_distortion = true;
  MaskLossOptions mask;

  void validate() const {
    weights.validate();
    if (!(std::isfinite(silog_lambda) && silog_lambda >= 0.0 && silog_lambda <= 1.0)) {
      throw ArgumentError("silog_lambda must lie in [0, 1]");
    }
    if (!(sobel_percentile > 0.0 && sobel_percentile < 100.0)) {
      throw ArgumentError("sobel_percentile must lie in (0, 100)");
    }
    if (!(df_fov_deg > 0.0 && df_fov_deg < 180.0)) throw ArgumentError("df_fov_deg must lie in (0, 180)");
    if (df_patch_size < 2) throw ArgumentError("df_patch_size must be >= 2");
    if (!(std::isfinite(mask.bce_pos_weight) && mask.bce_pos_weight > 0.0)) {
      throw ArgumentError("bce_pos_weight must be positive");
    }
  }
};

struct LossReport {
  std::array<double, 6> terms{};        // unweighted term values
  std::array<std::size_t, 6> counts{};  // contributing pixels per term
  double total = 0.0;
  std::optional<Raster<double>> gradient;       // ∂total/∂pred depth
  std::optional<Raster<double>> mask_gradient;  // ∂total/∂pred mask, when masks are given

  double term(LossTerm t) const noexcept { return terms[static_cast<int>(t)]; }
};

/// Weighted sum of all six terms. ERP-resident terms use distortion-weighted
/// means when `opts.use_distortion` is set; the perspective-space DF term is
/// never weighted. Mask terms are skipped (zero) unless both masks are given.
template <std::floating_point T>
LossReport total_loss(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt, const BinaryMask* pred_mask,
                      const BinaryMask* gt_mask, const LossOptions& opts, const DfGramLoss& df,
                      bool with_gradient = true) {
  opts.validate();
  require_same_shape(pred.values(), gt.values(), "total_loss");
  const auto grid = ErpGrid::of(pred);
  std::optional<DistortionMap> dmap;
  if (opts.use_distortion) dmap = distortion_map(grid);
  const DistortionMap* w = dmap ? &*dmap : nullptr;

  LossReport rep;
  Raster<double> grad(pred.width(), pred.height(), 0.0);
  auto add = [&](LossTerm t, const LossResult& r) {
    const int k = static_cast<int>(t);
    rep.terms[k] = r.value;
    rep.counts[k] = r.count;
    rep.total += opts.weights[t] * r.value;
    if (with_gradient && t != LossTerm::kMask) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += opts.weights[t] * r.gradient[i];
    }
  };

  add(LossTerm::kSilog, silog(pred, gt, w, opts.silog_lambda));
  add(LossTerm::kDf, df(pred, gt));
  const auto edges = sobel_edge_mask(gt, opts.sobel_percentile);
  add(LossTerm::kGrad, grad_loss(pred, gt, edges, w, opts.silog_lambda));
  add(LossTerm::kNormal, normal_loss(pred, gt, w));
  add(LossTerm::kPts, pts_loss(pred, gt, w));
  if (pred_mask && gt_mask) {
    const auto m = mask_loss(*pred_mask, *gt_mask, w, opts.mask);
    add(LossTerm::kMask, m);
    if (with_gradient) {
      Raster<double> mg = m.gradient;
      for (double& g : mg.data()) g *= opts.weights[LossTerm::kMask];
      rep.mask_gradient = std::move(mg);
    }
  }
  if (with_gradient) rep.gradient = std::move(grad);
  return rep;
}

template <std::floating_point T>
LossReport total_loss(const BasicDepthMap<T>& pred, const BasicDepthMap<T>& gt, const BinaryMask* pred_mask,
                      const BinaryMask* gt_mask, const LossOptions& opts, bool with_gradient = true) {
  const auto rig = icosahedron_rig(opts.df_fov_deg, opts.df_patch_size);
  return total_loss(pred, gt, pred_mask, gt_mask, opts, DfGramLoss(rig, ErpGrid::of(pred)), with_gradient);
}

}  // namespace panodepth
