#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "panodepth/losses/common.hpp"

namespace panodepth {

inline constexpr double kDiceEpsilon = 1e-6;
inline constexpr double kDiceWeight = 0.5;

/// Pixel term paired with the Dice loss in the range-mask objective.
enum class MaskLossVariant {
  kMseDice,  // mean squared error + 0.5·Dice (the written objective)
  kBceDice,  // weighted binary cross-entropy + 0.5·Dice
};

inline std::string_view to_string(MaskLossVariant v) {
  return v == MaskLossVariant::kMseDice ? "mse_dice" : "bce_dice";
}

inline MaskLossVariant mask_variant_from_string(std::string_view s) {
  if (s == "mse_dice") return MaskLossVariant::kMseDice;
  if (s == "bce_dice") return MaskLossVariant::kBceDice;
  throw ArgumentError("unknown mask loss variant '" + std::string(s) + "'");
}

struct MaskLossOptions {
  MaskLossVariant variant = MaskLossVariant::kMseDice;
  double bce_pos_weight = 1.0;  // multiplies the positive-class log term
};

/// Soft Dice loss 1 − (2ΣM·G + ε)/(ΣM + ΣG + ε), optionally weighted.
inline double dice_loss(const BinaryMask& pred, const BinaryMask& gt, const DistortionMap* weights = nullptr) {
  require_same_shape(pred.values(), gt.values(), "dice_loss");
  const detail::PixelWeights w(weights);
  double inter = 0.0, total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += w[i] * pred[i] * gt[i];
    total += w[i] * (pred[i] + gt[i]);
  }
  return 1.0 - (2.0 * inter + kDiceEpsilon) / (total + kDiceEpsilon);
}

/// Range-mask loss with gradient w.r.t. the soft predicted mask.
inline LossResult mask_loss(const BinaryMask& pred, const BinaryMask& gt, const DistortionMap* weights = nullptr,
                            const MaskLossOptions& opts = {}) {
  require_same_shape(pred.values(), gt.values(), "mask_loss");
  if (!gt.is_hard()) throw ArgumentError("mask_loss: ground-truth mask must be hard (0/1)");
  const detail::PixelWeights w(weights);
  w.check(pred.values(), "mask_loss");

  const std::size_t n = pred.size();
  LossResult r{0.0, Raster<double>(pred.width(), pred.height(), 0.0), n};
  double sw = 0.0, inter = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    inter += w[i] * pred[i] * gt[i];
    total += w[i] * (static_cast<double>(pred[i]) + gt[i]);
  }

  constexpr double kClamp = 1e-7;
  double pixel_term = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = pred[i];
    const double g = gt[i];
    if (opts.variant == MaskLossVariant::kMseDice) {
      pixel_term += w[i] * (m - g) * (m - g);
      r.gradient[i] = 2.0 * w[i] * (m - g) / sw;
    } else {
      const double mc = std::clamp(m, kClamp, 1.0 - kClamp);
      pixel_term -= w[i] * (opts.bce_pos_weight * g * std::log(mc) + (1.0 - g) * std::log(1.0 - mc));
      const bool clamped = m <= kClamp || m >= 1.0 - kClamp;
      r.gradient[i] = clamped ? 0.0 : -w[i] * (opts.bce_pos_weight * g / mc - (1.0 - g) / (1.0 - mc)) / sw;
    }
  }
  pixel_term /= sw;

  const double a = 2.0 * inter + kDiceEpsilon;
  const double b = total + kDiceEpsilon;
  const double dice = 1.0 - a / b;
  for (std::size_t i = 0; i < n; ++i) {
    // ∂(1 − a/b)/∂m_i = −(2 g_i w_i b − a w_i)/b²
    r.gradient[i] += kDiceWeight * -(2.0 * gt[i] * w[i] * b - a * w[i]) / (b * b);
  }
  r.value = pixel_term + kDiceWeight * dice;
  return r;
}

}  // namespace panodepth
