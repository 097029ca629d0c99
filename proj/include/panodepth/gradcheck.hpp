#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "panodepth/core.hpp"
#include "panodepth/losses.hpp"
#include "panodepth/random.hpp"

namespace panodepth {

inline constexpr std::array<std::string_view, 6> kGradcheckLosses = {"silog", "df",     "grad",
                                                                    "normal", "pts", "mask"};

struct GradcheckOptions {
  int width = 32;
  int height = 16;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  double step = 1e-4;            // relative central-difference step
  double min_gradient = 1e-8;    // pixels with a smaller analytic gradient are skipped
  int df_patch_size = 16;
  double df_fov_deg = 90.0;
};

struct GradcheckResult {
  std::string loss;
  double value = 0.0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

/// Random instance used by gradient checks: depths uniform in [0.5, 50],
/// a soft predicted mask in [0.05, 0.95] and the hard 20 m range mask of gt.
struct GradcheckInstance {
  BasicDepthMap<double> pred;
  BasicDepthMap<double> gt;
  BinaryMask pred_mask;
  BinaryMask gt_mask;

  static GradcheckInstance random(int width, int height, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> p(static_cast<std::size_t>(width) * height);
    std::vector<double> g(p.size());
    std::vector<float> m(p.size());
    for (auto& x : g) x = rng.uniform(0.5, 50.0);
    for (auto& x : p) x = rng.uniform(0.5, 50.0);
    for (auto& x : m) x = static_cast<float>(rng.uniform(0.05, 0.95));
    auto gt = BasicDepthMap<double>::from_values(width, height, std::move(g));
    auto gmask = gt_range_mask(gt, RangeThreshold(20.0));
    return {BasicDepthMap<double>::from_values(width, height, std::move(p)), std::move(gt),
            BinaryMask(width, height, std::move(m)), std::move(gmask)};
  }
};

namespace detail {

/// Central differences of `f` against `analytic`, perturbing entries of
/// `values` in place. The step is the exactly representable difference, so
/// float storage does not bias the quotient.
template <typename V, typename F>
void compare_gradient(std::vector<V>& values, const Raster<double>& analytic, F&& f,
                      const GradcheckOptions& opt, GradcheckResult& res) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double a = analytic[i];
    if (std::abs(a) <= opt.min_gradient) continue;
    const V x0 = values[i];
    const double h = opt.step * std::max(std::abs(static_cast<double>(x0)), 1e-3);
    const V xp = static_cast<V>(x0 + h);
    const V xm = static_cast<V>(x0 - h);
    values[i] = xp;
    const double fp = f(values);
    values[i] = xm;
    const double fm = f(values);
    values[i] = x0;
    const double n = (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
    const double rel = std::abs(a - n) / std::max(std::abs(a), std::abs(n));
    ++res.checked;
    if (res.checked == 1 || rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = i;
      res.worst_analytic = a;
      res.worst_numeric = n;
    }
  }
}

}  // namespace detail

/// Analytic gradient of one loss vs. central finite differences on a random
/// instance. `loss` is one of kGradcheckLosses.
inline GradcheckResult gradcheck(std::string_view loss, const GradcheckOptions& opt) {
  auto inst = GradcheckInstance::random(opt.width, opt.height, opt.seed);
  GradcheckResult res;
  res.loss = std::string(loss);
  const int W = opt.width;
  const int H = opt.height;
  const auto grid = ErpGrid(W, H);
  const auto dmap = distortion_map(grid);

  if (loss == "mask") {
    std::vector<float> m(inst.pred_mask.values().vector());
    auto f = [&](const std::vector<float>& x) { return mask_loss(BinaryMask(W, H, x), inst.gt_mask, &dmap).value; };
    const auto r = mask_loss(inst.pred_mask, inst.gt_mask, &dmap);
    res.value = r.value;
    detail::compare_gradient(m, r.gradient, f, opt, res);
    res.passed = res.checked > 0 && res.max_rel_error <= opt.tolerance;
    return res;
  }

  std::function<LossResult(const BasicDepthMap<double>&)> eval;
  std::optional<DfGramLoss> df;
  std::optional<EdgeMask> edges;
  if (loss == "silog") {
    eval = [&](const BasicDepthMap<double>& p) { return silog(p, inst.gt, &dmap); };
  } else if (loss == "df") {
    df.emplace(icosahedron_rig(opt.df_fov_deg, opt.df_patch_size), grid);
    eval = [&](const BasicDepthMap<double>& p) { return (*df)(p, inst.gt); };
  } else if (loss == "grad") {
    edges = sobel_edge_mask(inst.gt);
    eval = [&](const BasicDepthMap<double>& p) { return grad_loss(p, inst.gt, *edges, &dmap); };
  } else if (loss == "normal") {
    eval = [&](const BasicDepthMap<double>& p) { return normal_loss(p, inst.gt, &dmap); };
  } else if (loss == "pts") {
    eval = [&](const BasicDepthMap<double>& p) { return pts_loss(p, inst.gt, &dmap); };
  } else {
    throw ArgumentError("gradcheck: unknown loss '" + std::string(loss) + "'");
  }

  const auto r = eval(inst.pred);
  res.value = r.value;
  std::vector<double> x(inst.pred.values().vector());
  const auto valid = inst.pred.valid();
  auto f = [&](const std::vector<double>& v) {
    return eval(BasicDepthMap<double>(Raster<double>(W, H, v), valid)).value;
  };
  detail::compare_gradient(x, r.gradient, f, opt, res);
  res.passed = res.checked > 0 && res.max_rel_error <= opt.tolerance;
  return res;
}

}  // namespace panodepth
