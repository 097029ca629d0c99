#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "panodepth/error.hpp"
#include "panodepth/losses/total.hpp"
#include "toml.hpp"

namespace panodepth {

/// Configuration schema violation. `field()` is the dotted key path.
class ConfigError : public ArgumentError {
 public:
  ConfigError(std::string field, const std::string& what)
      : ArgumentError("config field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// TOML document as JSON (tables → objects, arrays → arrays). Dates and times
/// are rejected.
inline nlohmann::json toml_to_json(const toml::node& node, const std::string& where = "") {
  if (const auto* t = node.as_table()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      out[key] = toml_to_json(v, where.empty() ? key : where + "." + key);
    }
    return out;
  }
  if (const auto* a = node.as_array()) {
    nlohmann::json out = nlohmann::json::array();
    std::size_t i = 0;
    for (const auto& v : *a) out.push_back(toml_to_json(v, where + "[" + std::to_string(i++) + "]"));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw ConfigError(where, "unsupported TOML value type");
}

/// Parses a .toml or .json file into JSON.
inline nlohmann::json load_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
    }
  }
  try {
    return toml_to_json(toml::parse(text, path.string()));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "invalid TOML: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError("<document>", msg.str());
  }
}

namespace detail {

inline void only_keys(const nlohmann::json& obj, const std::string& where,
                      std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected a table");
  for (const auto& [k, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(where.empty() ? k : where + "." + k, "unknown key");
  }
}

inline double number_at(const nlohmann::json& obj, const std::string& key, const std::string& where, double dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key, "expected a number");
  return v.get<double>();
}

inline bool bool_at(const nlohmann::json& obj, const std::string& key, const std::string& where, bool dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key, "expected true or false");
  return v.get<bool>();
}

}  // namespace detail

/// Loss configuration schema (TOML or JSON, all keys optional):
///
///   [weights]     silog, df, grad, normal, pts, mask    (λ1..λ6)
///   [silog]       lambda                                (variance focus)
///   [grad]        sobel_percentile
///   [df]          fov_deg, patch_size
///   [distortion]  enabled
///   [mask]        variant = "mse_dice" | "bce_dice", bce_pos_weight
inline LossOptions loss_options_from_json(const nlohmann::json& doc) {
  LossOptions o;
  detail::only_keys(doc, "", {"weights", "silog", "grad", "df", "distortion", "mask"});
  if (doc.contains("weights")) {
    const auto& w = doc["weights"];
    detail::only_keys(w, "weights", {"silog", "df", "grad", "normal", "pts", "mask"});
    for (std::size_t k = 0; k < kLossTermNames.size(); ++k) {
      const std::string name(kLossTermNames[k]);
      o.weights.lambda[k] = detail::number_at(w, name, "weights", o.weights.lambda[k]);
      if (!(std::isfinite(o.weights.lambda[k]) && o.weights.lambda[k] >= 0.0)) {
        throw ConfigError("weights." + name, "must be finite and non-negative");
      }
    }
  }
  if (doc.contains("silog")) {
    detail::only_keys(doc["silog"], "silog", {"lambda"});
    o.silog_lambda = detail::number_at(doc["silog"], "lambda", "silog", o.silog_lambda);
    if (!(o.silog_lambda >= 0.0 && o.silog_lambda <= 1.0)) throw ConfigError("silog.lambda", "must lie in [0, 1]");
  }
  if (doc.contains("grad")) {
    detail::only_keys(doc["grad"], "grad", {"sobel_percentile"});
    o.sobel_percentile = detail::number_at(doc["grad"], "sobel_percentile", "grad", o.sobel_percentile);
    if (!(o.sobel_percentile > 0.0 && o.sobel_percentile < 100.0)) {
      throw ConfigError("grad.sobel_percentile", "must lie in (0, 100)");
    }
  }
  if (doc.contains("df")) {
    const auto& df = doc["df"];
    detail::only_keys(df, "df", {"fov_deg", "patch_size"});
    o.df_fov_deg = detail::number_at(df, "fov_deg", "df", o.df_fov_deg);
    if (!(o.df_fov_deg >= kMinCoverageFovDeg && o.df_fov_deg < 180.0)) {
      throw ConfigError("df.fov_deg", "must lie in [75, 180) for full sphere coverage");
    }
    if (df.contains("patch_size")) {
      if (!df["patch_size"].is_number_integer() || df["patch_size"].get<long long>() < 2 ||
          df["patch_size"].get<long long>() > 4096) {
        throw ConfigError("df.patch_size", "expected an integer in [2, 4096]");
      }
      o.df_patch_size = df["patch_size"].get<int>();
    }
  }
  if (doc.contains("distortion")) {
    detail::only_keys(doc["distortion"], "distortion", {"enabled"});
    o.use_distortion = detail::bool_at(doc["distortion"], "enabled", "distortion", o.use_distortion);
  }
  if (doc.contains("mask")) {
    const auto& m = doc["mask"];
    detail::only_keys(m, "mask", {"variant", "bce_pos_weight"});
    if (m.contains("variant")) {
      if (!m["variant"].is_string()) throw ConfigError("mask.variant", "expected a string");
      try {
        o.mask.variant = mask_variant_from_string(m["variant"].get<std::string>());
      } catch (const ArgumentError&) {
        throw ConfigError("mask.variant", "expected \"mse_dice\" or \"bce_dice\"");
      }
    }
    o.mask.bce_pos_weight = detail::number_at(m, "bce_pos_weight", "mask", o.mask.bce_pos_weight);
    if (!(o.mask.bce_pos_weight > 0.0)) throw ConfigError("mask.bce_pos_weight", "must be positive");
  }
  return o;
}

inline nlohmann::json to_json(const LossOptions& o) {
  nlohmann::json weights = nlohmann::json::object();
  for (std::size_t k = 0; k < kLossTermNames.size(); ++k) weights[std::string(kLossTermNames[k])] = o.weights.lambda[k];
  return {{"weights", weights},
          {"silog", {{"lambda", o.silog_lambda}}},
          {"grad", {{"sobel_percentile", o.sobel_percentile}}},
          {"df", {{"fov_deg", o.df_fov_deg}, {"patch_size", o.df_patch_size}}},
          {"distortion", {{"enabled", o.use_distortion}}},
          {"mask", {{"variant", std::string(to_string(o.mask.variant))}, {"bce_pos_weight", o.mask.bce_pos_weight}}}};
}

inline LossOptions load_loss_options(const std::filesystem::path& path) {
  return loss_options_from_json(load_config_document(path));
}

}  // namespace panodepth
