#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "panodepth/error.hpp"

namespace panodepth::curation {

namespace fs = std::filesystem;

enum class Domain { kIndoor, kOutdoor };
enum class Source { kSynthetic, kReal, kGenerated };

inline std::string_view to_string(Domain d) { return d == Domain::kIndoor ? "indoor" : "outdoor"; }

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::kSynthetic: return "synthetic";
    case Source::kReal: return "real";
    case Source::kGenerated: return "generated";
  }
  return "real";
}

inline Domain domain_from_string(std::string_view s) {
  if (s == "indoor") return Domain::kIndoor;
  if (s == "outdoor") return Domain::kOutdoor;
  throw ArgumentError("unknown domain '" + std::string(s) + "' (expected indoor|outdoor)");
}

inline Source source_from_string(std::string_view s) {
  if (s == "synthetic") return Source::kSynthetic;
  if (s == "real") return Source::kReal;
  if (s == "generated") return Source::kGenerated;
  throw ArgumentError("unknown source '" + std::string(s) + "' (expected synthetic|real|generated)");
}

struct SampleRecord {
  std::string id;
  std::string image_path;
  std::optional<std::string> depth_path;
  Domain domain = Domain::kOutdoor;
  Source source = Source::kReal;
  std::optional<double> score;
  std::string stage_tag;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Provenance {
  std::string stage;        // creating stage (or step) name
  std::string config_hash;  // hex digest of the stage configuration
  std::vector<std::string> notes;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SampleManifest {
  std::vector<SampleRecord> records;
  Provenance provenance;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  void sort_by_id() {
    std::stable_sort(records.begin(), records.end(),
                     [](const SampleRecord& a, const SampleRecord& b) { return a.id < b.id; });
  }

  /// Throws ArgumentError naming the first duplicated id.
  void check_unique_ids() const {
    std::set<std::string_view> seen;
    for (const auto& r : records) {
      if (!seen.insert(r.id).second) throw ArgumentError("duplicate sample id '" + r.id + "'");
    }
  }
};

inline nlohmann::json to_json(const SampleRecord& r) {
  nlohmann::json j = {{"id", r.id},
                      {"image_path", r.image_path},
                      {"domain", std::string(to_string(r.domain))},
                      {"source", std::string(to_string(r.source))},
                      {"stage_tag", r.stage_tag}};
  j["depth_path"] = r.depth_path ? nlohmann::json(*r.depth_path) : nlohmann::json(nullptr);
  j["score"] = r.score ? nlohmann::json(*r.score) : nlohmann::json(nullptr);
  return j;
}

inline SampleRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("manifest record must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    static constexpr std::string_view kKeys[] = {"id", "image_path", "depth_path", "domain",
                                                 "source", "score", "stage_tag"};
    if (std::find(std::begin(kKeys), std::end(kKeys), k) == std::end(kKeys)) {
      throw ArgumentError("manifest record has unknown field '" + k + "'");
    }
  }
  auto str = [&](const char* key, bool required) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) {
      if (required) throw ArgumentError(std::string("manifest record lacks '") + key + "'");
      return std::nullopt;
    }
    if (!j[key].is_string()) throw ArgumentError(std::string("manifest field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  SampleRecord r;
  r.id = *str("id", true);
  if (r.id.empty()) throw ArgumentError("manifest record has an empty id");
  r.image_path = *str("image_path", true);
  r.depth_path = str("depth_path", false);
  r.domain = domain_from_string(*str("domain", true));
  r.source = source_from_string(*str("source", true));
  r.stage_tag = str("stage_tag", false).value_or("");
  if (j.contains("score") && !j["score"].is_null()) {
    if (!j["score"].is_number()) throw ArgumentError("manifest field 'score' must be a number");
    r.score = j["score"].get<double>();
  }
  return r;
}

/// One compact JSON object per line, keys in sorted order.
inline std::string to_jsonl(const SampleManifest& m) {
  std::string out;
  for (const auto& r : m.records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline SampleManifest manifest_from_jsonl(std::string_view text, const std::string& origin = "<memory>") {
  SampleManifest m;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ArgumentError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  m.check_unique_ids();
  return m;
}

inline SampleManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_jsonl(ss.str(), path.string());
}

inline void save_manifest(const SampleManifest& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << to_jsonl(m);
  if (!out) throw std::runtime_error("short write to manifest " + path.string());
}

}  // namespace panodepth::curation
