#pragma once

#include "json.hpp"
#include "panodepth/config.hpp"
#include "panodepth/losses/total.hpp"
#include "panodepth/metrics.hpp"

namespace panodepth {

inline nlohmann::json to_json(const EvalConfig& c) {
  return {{"min_depth", c.min_depth},
          {"max_depth", c.max_depth ? nlohmann::json(*c.max_depth) : nlohmann::json(nullptr)},
          {"latitude_weighted", c.latitude_weighted},
          {"alignment", "none"}};
}

/// Fixed field names: abs_rel, rmse, delta1..3, n_valid, config.
inline nlohmann::json to_json(const MetricsReport& r, const EvalConfig& c) {
  return {{"abs_rel", r.abs_rel}, {"rmse", r.rmse},       {"delta1", r.delta1},   {"delta2", r.delta2},
          {"delta3", r.delta3},   {"n_valid", r.n_valid}, {"aggregated", r.aggregated},
          {"n_images", r.n_images}, {"config", to_json(c)}};
}

inline nlohmann::json to_json(const LossReport& r, const LossOptions& o) {
  nlohmann::json terms = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t k = 0; k < kLossTermNames.size(); ++k) {
    terms[std::string(kLossTermNames[k])] = r.terms[k];
    counts[std::string(kLossTermNames[k])] = r.counts[k];
  }
  return {{"terms", terms}, {"counts", counts}, {"total", r.total}, {"config", to_json(o)}};
}

}  // namespace panodepth
