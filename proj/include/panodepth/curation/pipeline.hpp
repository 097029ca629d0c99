#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "panodepth/config.hpp"
#include "panodepth/curation/digest.hpp"
#include "panodepth/curation/manifest.hpp"
#include "panodepth/curation/stages.hpp"
#include "panodepth/error.hpp"

namespace panodepth::curation {

inline constexpr std::array<std::string_view, 3> kStageNames = {"scene-invariant-labeler", "realism-invariant-labeler",
                                                                "dap"};

/// A manifest consumed by a stage: a file, or the output of an earlier stage.
struct ManifestSource {
  std::optional<fs::path> manifest;
  std::optional<std::string> stage;
  double weight = 1.0;
  std::string tag;

  std::string describe() const { return manifest ? manifest->string() : "stage:" + *stage; }
};

struct StageConfig {
  std::string name;
  std::optional<ManifestSource> pool;  // records to label / score / select
  std::vector<ManifestSource> inputs;  // mixed in unchanged
  std::optional<std::string> labeler;  // {input_list_path} {output_dir}
  std::optional<std::string> scorer;   // {pair_list_path}
  std::optional<std::size_t> k_indoor;
  std::optional<std::size_t> k_outdoor;
  std::optional<std::uint64_t> seed;
};

struct PipelineConfig {
  fs::path output_dir;
  unsigned workers = 1;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  std::vector<StageConfig> stages;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

namespace detail {

using panodepth::detail::number_at;
using panodepth::detail::only_keys;

inline std::string string_at(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key, "expected a string");
  return v.get<std::string>();
}

inline std::uint64_t count_at(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + "." + key, "expected an integer >= 0");
  return v.get<std::uint64_t>();
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

inline ManifestSource source_from_json(const nlohmann::json& j, const std::string& where, const fs::path& base) {
  only_keys(j, where, {"manifest", "stage", "weight", "tag"});
  ManifestSource s;
  if (j.contains("manifest")) s.manifest = resolve(base, string_at(j, "manifest", where));
  if (j.contains("stage")) s.stage = string_at(j, "stage", where);
  if (s.manifest.has_value() == s.stage.has_value()) {
    throw ConfigError(where, "exactly one of 'manifest' or 'stage' is required");
  }
  s.weight = number_at(j, "weight", where, 1.0);
  if (!(std::isfinite(s.weight) && s.weight >= 0.0)) throw ConfigError(where + ".weight", "must be finite and >= 0");
  if (j.contains("tag")) s.tag = string_at(j, "tag", where);
  return s;
}

inline nlohmann::json to_json(const ManifestSource& s) {
  nlohmann::json j = {{"weight", s.weight}, {"tag", s.tag}};
  if (s.manifest) j["manifest"] = s.manifest->string();
  if (s.stage) j["stage"] = *s.stage;
  return j;
}

}  // namespace detail

inline void PipelineConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("pipeline.output_dir", "required");
  if (workers == 0) throw ConfigError("pipeline.workers", "must be >= 1");
  if (stages.empty()) throw ConfigError("stage", "at least one [[stage]] is required");
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::string where = "stage[" + std::to_string(i) + "]";
    if (std::find(kStageNames.begin(), kStageNames.end(), s.name) == kStageNames.end()) {
      throw ConfigError(where + ".name",
                        "'" + s.name + "' is not one of scene-invariant-labeler, realism-invariant-labeler, dap");
    }
    if (std::find(seen.begin(), seen.end(), s.name) != seen.end()) {
      throw ConfigError(where + ".name", "duplicate stage '" + s.name + "'");
    }
    auto check_ref = [&](const ManifestSource& src, const std::string& field) {
      if (src.stage && std::find(seen.begin(), seen.end(), *src.stage) == seen.end()) {
        throw ConfigError(field + ".stage", "'" + *src.stage + "' is not an earlier stage");
      }
    };
    if (s.pool) check_ref(*s.pool, where + ".pool");
    for (std::size_t k = 0; k < s.inputs.size(); ++k) check_ref(s.inputs[k], where + ".inputs[" + std::to_string(k) + "]");
    if (!s.pool && (s.labeler || s.scorer || s.k_indoor || s.k_outdoor)) {
      throw ConfigError(where + ".pool", "labeler, scorer and selection need a pool");
    }
    if (!s.pool && s.inputs.empty()) throw ConfigError(where, "stage has neither a pool nor inputs");
    if (s.k_indoor.has_value() != s.k_outdoor.has_value()) {
      throw ConfigError(where + (s.k_indoor ? ".k_outdoor" : ".k_indoor"), "k_indoor and k_outdoor go together");
    }
    auto check_template = [&](const std::optional<std::string>& tmpl, const std::string& field,
                              std::initializer_list<std::string_view> placeholders) {
      if (!tmpl) return;
      std::map<std::string, std::string> dummy;
      for (auto p : placeholders) dummy[std::string(p)] = "x";
      try {
        (void)expand_command(*tmpl, dummy, placeholders);
      } catch (const ArgumentError& e) {
        throw ConfigError(field, e.what());
      }
    };
    check_template(s.labeler, where + ".labeler", {"input_list_path", "output_dir"});
    check_template(s.scorer, where + ".scorer", {"pair_list_path"});
    seen.push_back(s.name);
  }
}

/// Pipeline schema (TOML or JSON). Relative paths resolve against the
/// directory of the config file.
///
///   [pipeline]
///   output_dir = "out"        # required
///   workers = 1               # concurrent labeler / scorer batches
///   batch_size = 0            # samples per external call, 0 = all
///   seed = 0                  # default mixing seed
///
///   [[stage]]
///   name = "scene-invariant-labeler"    # | realism-invariant-labeler | dap
///   labeler = "cmd {input_list_path} {output_dir}"
///   scorer = "cmd {pair_list_path}"
///   k_indoor = 300
///   k_outdoor = 300
///   seed = 1                           # optional, overrides pipeline.seed
///   pool = { manifest = "unlabeled.jsonl", weight = 1.0, tag = "pseudo" }
///   [[stage.inputs]]
///   stage = "scene-invariant-labeler"  # or manifest = "path.jsonl"
///   weight = 2.0
///   tag = "prev"
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& doc, const fs::path& base = {}) {
  detail::only_keys(doc, "", {"pipeline", "stage"});
  PipelineConfig cfg;
  if (!doc.contains("pipeline")) throw ConfigError("pipeline", "required table");
  const auto& p = doc["pipeline"];
  detail::only_keys(p, "pipeline", {"output_dir", "workers", "batch_size", "seed"});
  if (!p.contains("output_dir")) throw ConfigError("pipeline.output_dir", "required");
  cfg.output_dir = detail::resolve(base, detail::string_at(p, "output_dir", "pipeline"));
  if (p.contains("workers")) cfg.workers = static_cast<unsigned>(detail::count_at(p, "workers", "pipeline"));
  if (p.contains("batch_size")) cfg.batch_size = detail::count_at(p, "batch_size", "pipeline");
  if (p.contains("seed")) cfg.seed = detail::count_at(p, "seed", "pipeline");

  if (doc.contains("stage")) {
    const auto& stages = doc["stage"];
    if (!stages.is_array()) throw ConfigError("stage", "expected an array of tables ([[stage]])");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& j = stages[i];
      const std::string where = "stage[" + std::to_string(i) + "]";
      detail::only_keys(j, where, {"name", "pool", "inputs", "labeler", "scorer", "k_indoor", "k_outdoor", "seed"});
      StageConfig s;
      if (!j.contains("name")) throw ConfigError(where + ".name", "required");
      s.name = detail::string_at(j, "name", where);
      if (j.contains("pool")) {
        s.pool = detail::source_from_json(j["pool"], where + ".pool", base);
        if (s.pool->tag.empty()) s.pool->tag = s.name;
      }
      if (j.contains("inputs")) {
        if (!j["inputs"].is_array()) throw ConfigError(where + ".inputs", "expected an array of tables");
        for (std::size_t k = 0; k < j["inputs"].size(); ++k) {
          auto src = detail::source_from_json(j["inputs"][k], where + ".inputs[" + std::to_string(k) + "]", base);
          if (src.tag.empty()) src.tag = "in" + std::to_string(k);
          s.inputs.push_back(std::move(src));
        }
      }
      if (j.contains("labeler")) s.labeler = detail::string_at(j, "labeler", where);
      if (j.contains("scorer")) s.scorer = detail::string_at(j, "scorer", where);
      if (j.contains("k_indoor")) s.k_indoor = detail::count_at(j, "k_indoor", where);
      if (j.contains("k_outdoor")) s.k_outdoor = detail::count_at(j, "k_outdoor", where);
      if (j.contains("seed")) s.seed = detail::count_at(j, "seed", where);
      cfg.stages.push_back(std::move(s));
    }
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  return pipeline_config_from_json(load_config_document(path), fs::absolute(path).parent_path());
}

inline nlohmann::json to_json(const StageConfig& s, std::uint64_t pipeline_seed) {
  nlohmann::json j = {{"name", s.name}, {"seed", s.seed.value_or(pipeline_seed)}};
  j["pool"] = s.pool ? detail::to_json(*s.pool) : nlohmann::json(nullptr);
  j["inputs"] = nlohmann::json::array();
  for (const auto& in : s.inputs) j["inputs"].push_back(detail::to_json(in));
  j["labeler"] = s.labeler ? nlohmann::json(*s.labeler) : nlohmann::json(nullptr);
  j["scorer"] = s.scorer ? nlohmann::json(*s.scorer) : nlohmann::json(nullptr);
  j["k_indoor"] = s.k_indoor ? nlohmann::json(*s.k_indoor) : nlohmann::json(nullptr);
  j["k_outdoor"] = s.k_outdoor ? nlohmann::json(*s.k_outdoor) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.stages) stages.push_back(to_json(s, c.seed));
  return {{"pipeline",
           {{"output_dir", c.output_dir.string()}, {"workers", c.workers}, {"batch_size", c.batch_size},
            {"seed", c.seed}}},
          {"stage", stages}};
}

enum class StageStatus { kRan, kSkipped };

struct StageOutcome {
  std::string name;
  StageStatus status = StageStatus::kRan;
  std::string config_hash;
  SampleManifest output;
  std::map<std::string, std::string> files;  // manifest file name → sha256
};

struct PipelineResult {
  std::vector<StageOutcome> stages;
  fs::path run_log;
};

/// Event callback, receives every run-log record as it is written.
using PipelineListener = std::function<void(const nlohmann::json&)>;

namespace detail {

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void append_line(const fs::path& p, const std::string& line) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + p.string());
  out << line << '\n';
}

/// Records with a depth_path must point at an existing file.
inline void check_depth_files(const SampleManifest& m, const std::string& stage, const std::string& origin) {
  for (const auto& r : m.records) {
    if (r.depth_path && !fs::exists(*r.depth_path)) {
      throw StageError(stage, origin + ": depth file of '" + r.id + "' is missing: " + *r.depth_path);
    }
  }
}

/// Stored state is reusable when the hash matches and every recorded file
/// still has its recorded digest and all referenced depth files exist.
inline bool state_is_current(const fs::path& dir, const std::string& config_hash) {
  const fs::path state_path = dir / "stage.json";
  if (!fs::exists(state_path)) return false;
  nlohmann::json state;
  try {
    state = nlohmann::json::parse(read_file(state_path));
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (!state.contains("config_hash") || state["config_hash"] != config_hash || !state.contains("files")) return false;
  if (!state["files"].contains("output.jsonl")) return false;
  for (const auto& [name, digest] : state["files"].items()) {
    const fs::path f = dir / name;
    if (!fs::exists(f) || sha256_file(f) != digest.get<std::string>()) return false;
    try {
      for (const auto& r : load_manifest(f).records) {
        if (r.depth_path && !fs::exists(*r.depth_path)) return false;
      }
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

/// Executes the stages in order. Each stage writes into
/// `<output_dir>/<stage name>/`:
///
///   labeled.jsonl, scored.jsonl, selected.jsonl   (when the step is configured)
///   output.jsonl                                  (the mixed stage output)
///   depth/<id>.pfm                                (labeler outputs)
///   stage.json                                    (hash and file digests)
///
/// and one JSON line per stage event to `<output_dir>/run_log.jsonl`.
/// A stage whose hash (configuration plus input manifest contents) and
/// outputs are unchanged is skipped; once a stage executes, every later
/// stage executes too.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineListener& listener = {}) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  PipelineResult result;
  result.run_log = cfg.output_dir / "run_log.jsonl";
  auto log = [&](nlohmann::json event) {
    detail::append_line(result.run_log, event.dump());
    if (listener) listener(event);
  };

  std::map<std::string, fs::path> stage_outputs;
  bool dirty = false;
  for (const auto& stage : cfg.stages) {
    const fs::path dir = cfg.output_dir / stage.name;
    const std::uint64_t seed = stage.seed.value_or(cfg.seed);
    try {
      auto locate = [&](const ManifestSource& src) -> fs::path {
        const fs::path p = src.manifest ? *src.manifest : stage_outputs.at(*src.stage);
        if (!fs::exists(p)) throw StageError(stage.name, "input manifest not found: " + p.string());
        return p;
      };

      Sha256 h;
      h.update(to_json(stage, cfg.seed).dump());
      std::vector<const ManifestSource*> sources;
      if (stage.pool) sources.push_back(&*stage.pool);
      for (const auto& in : stage.inputs) sources.push_back(&in);
      for (const auto* src : sources) h.update("\n" + src->describe() + "=" + sha256_file(locate(*src)));
      const std::string config_hash = h.hex();

      StageOutcome outcome;
      outcome.name = stage.name;
      outcome.config_hash = config_hash;

      if (!dirty && detail::state_is_current(dir, config_hash)) {
        outcome.status = StageStatus::kSkipped;
        outcome.output = load_manifest(dir / "output.jsonl");
        outcome.output.provenance = {stage.name, config_hash, {}};
        const auto state = nlohmann::json::parse(detail::read_file(dir / "stage.json"));
        outcome.files = state["files"].get<std::map<std::string, std::string>>();
        stage_outputs[stage.name] = dir / "output.jsonl";
        log({{"stage", stage.name}, {"status", "skipped"}, {"config_hash", config_hash},
             {"records", outcome.output.size()}});
        result.stages.push_back(std::move(outcome));
        continue;
      }
      dirty = true;
      fs::remove(dir / "stage.json");
      fs::create_directories(dir);

      auto load_input = [&](const ManifestSource& src) {
        const fs::path p = locate(src);
        SampleManifest m;
        try {
          m = load_manifest(p);
        } catch (const std::exception& e) {
          throw StageError(stage.name, e.what());
        }
        detail::check_depth_files(m, stage.name, p.string());
        return m;
      };
      auto persist = [&](const SampleManifest& m, const std::string& file) {
        save_manifest(m, dir / file);
        outcome.files[file] = sha256_file(dir / file);
      };

      std::vector<std::string> notes;
      auto keep_notes = [&](const SampleManifest& m) {
        notes.insert(notes.end(), m.provenance.notes.begin(), m.provenance.notes.end());
      };
      ProcessOptions popts{stage.name, dir / "work", cfg.batch_size, cfg.workers};

      std::vector<MixInput> mix;
      if (stage.pool) {
        SampleManifest pool = load_input(*stage.pool);
        if (stage.labeler) {
          fs::remove_all(dir / "depth");
          pool = invoke_labeler(pool, *stage.labeler, dir / "depth", popts);
          pool.sort_by_id();
          keep_notes(pool);
          persist(pool, "labeled.jsonl");
        }
        if (stage.scorer) {
          pool = score_samples(pool, *stage.scorer, popts);
          pool.sort_by_id();
          persist(pool, "scored.jsonl");
        }
        if (stage.k_indoor) {
          try {
            pool = select_top_k(pool, *stage.k_indoor, *stage.k_outdoor);
          } catch (const ArgumentError& e) {
            throw StageError(stage.name, e.what());
          }
          keep_notes(pool);
          persist(pool, "selected.jsonl");
        }
        mix.push_back({std::move(pool), stage.pool->weight, stage.pool->tag});
      }
      for (const auto& in : stage.inputs) mix.push_back({load_input(in), in.weight, in.tag});

      SampleManifest out;
      try {
        out = mix_datasets(mix, seed);
      } catch (const ArgumentError& e) {
        throw StageError(stage.name, e.what());
      }
      keep_notes(out);
      out.provenance = {stage.name, config_hash, notes};
      persist(out, "output.jsonl");

      nlohmann::json state = {{"stage", stage.name}, {"config_hash", config_hash}, {"files", outcome.files},
                              {"notes", notes}, {"seed", seed}};
      detail::write_text(dir / "stage.json", state.dump(2) + "\n");
      stage_outputs[stage.name] = dir / "output.jsonl";
      outcome.output = std::move(out);
      log({{"stage", stage.name}, {"status", "ran"}, {"config_hash", config_hash},
           {"records", outcome.output.size()}, {"notes", notes}});
      result.stages.push_back(std::move(outcome));
    } catch (const StageError& e) {
      log({{"stage", stage.name}, {"status", "failed"}, {"error", e.what()}});
      throw;
    } catch (const std::exception& e) {
      log({{"stage", stage.name}, {"status", "failed"}, {"error", e.what()}});
      throw StageError(stage.name, e.what());
    }
  }
  return result;
}

}  // namespace panodepth::curation
