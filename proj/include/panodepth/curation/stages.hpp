#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "panodepth/curation/manifest.hpp"
#include "panodepth/curation/process.hpp"
#include "panodepth/error.hpp"
#include "panodepth/random.hpp"

namespace panodepth::curation {

/// Shared knobs of the external-process steps.
struct ProcessOptions {
  std::string stage = "adhoc";  // name used in errors and stage tags
  fs::path work_dir;            // listing files and logs go here
  std::size_t batch_size = 0;   // 0: one batch
  unsigned workers = 1;         // concurrent batches
};

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> batches(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t step = batch_size == 0 ? std::max<std::size_t>(n, 1) : batch_size;
  for (std::size_t begin = 0; begin < n; begin += step) out.emplace_back(begin, std::min(n, begin + step));
  return out;
}

/// Runs fn(batch_index) for every batch on at most `workers` threads and
/// rethrows the first failure (lowest batch index) after all have finished.
template <typename Fn>
void for_each_batch(std::size_t count, unsigned workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < count;) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string tail(const std::string& s, std::size_t n = 2000) {
  return s.size() <= n ? s : "..." + s.substr(s.size() - n);
}

}  // namespace detail

/// Runs the external depth predictor.
///
/// Contract: the command template receives {input_list_path}, a text file
/// with one "<id>\t<image_path>" line per sample, and {output_dir}, where it
/// must write "<id>.pfm" for every sample it labels. Samples without an
/// output are dropped and noted in the provenance.
inline SampleManifest invoke_labeler(const SampleManifest& in, const std::string& command,
                                     const fs::path& output_dir, const ProcessOptions& opts) {
  SampleManifest out;
  out.provenance.stage = opts.stage;
  if (in.empty()) return out;
  for (const auto& r : in.records) {
    if (!fs::exists(r.image_path)) throw StageError(opts.stage, "image not found for '" + r.id + "': " + r.image_path);
  }
  fs::create_directories(output_dir);
  fs::create_directories(opts.work_dir);

  const auto parts = detail::batches(in.size(), opts.batch_size);
  detail::for_each_batch(parts.size(), opts.workers, [&](std::size_t k) {
    std::string listing;
    for (std::size_t i = parts[k].first; i < parts[k].second; ++i) {
      listing += in.records[i].id + "\t" + in.records[i].image_path + "\n";
    }
    const fs::path list_path = opts.work_dir / ("label_batch_" + std::to_string(k) + ".txt");
    detail::write_text(list_path, listing);
    const std::string cmd = expand_command(
        command, {{"input_list_path", list_path.string()}, {"output_dir", output_dir.string()}},
        {"input_list_path", "output_dir"});
    const auto res = run_command(cmd, true);
    if (res.exit_code != 0) {
      throw StageError(opts.stage, "labeler exited with status " + std::to_string(res.exit_code) +
                                       " on batch " + std::to_string(k) + ":\n" + detail::tail(res.output));
    }
  });

  std::size_t skipped = 0;
  for (const auto& r : in.records) {
    const fs::path depth = output_dir / (r.id + ".pfm");
    if (!fs::exists(depth)) {
      out.provenance.notes.push_back("skipped '" + r.id + "': labeler produced no output");
      ++skipped;
      continue;
    }
    SampleRecord labeled = r;
    labeled.depth_path = depth.string();
    labeled.score.reset();
    labeled.stage_tag = opts.stage;
    out.records.push_back(std::move(labeled));
  }
  if (skipped) out.provenance.notes.push_back("labeler skipped " + std::to_string(skipped) + " sample(s)");
  return out;
}

/// Runs the external quality scorer.
///
/// Contract: the command template receives {pair_list_path}, a text file with
/// one "<image_path>\t<depth_path>" line per sample, and prints one decimal
/// score per line on standard output, in input order.
inline SampleManifest score_samples(const SampleManifest& in, const std::string& command, const ProcessOptions& opts) {
  SampleManifest out;
  out.provenance.stage = opts.stage;
  if (in.empty()) return out;
  for (const auto& r : in.records) {
    if (!r.depth_path) throw StageError(opts.stage, "record '" + r.id + "' has no depth_path to score");
  }
  fs::create_directories(opts.work_dir);
  out.records = in.records;

  const auto parts = detail::batches(in.size(), opts.batch_size);
  detail::for_each_batch(parts.size(), opts.workers, [&](std::size_t k) {
    const auto [begin, end] = parts[k];
    std::string listing;
    for (std::size_t i = begin; i < end; ++i) listing += in.records[i].image_path + "\t" + *in.records[i].depth_path + "\n";
    const fs::path list_path = opts.work_dir / ("score_batch_" + std::to_string(k) + ".txt");
    detail::write_text(list_path, listing);
    const std::string cmd = expand_command(command, {{"pair_list_path", list_path.string()}}, {"pair_list_path"});
    const auto res = run_command(cmd, false);
    if (res.exit_code != 0) {
      throw StageError(opts.stage, "scorer exited with status " + std::to_string(res.exit_code) + " on batch " +
                                       std::to_string(k));
    }
    std::vector<std::string_view> lines;
    std::string_view text = res.output;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      lines.push_back(text.substr(0, nl));
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    }
    while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
    if (lines.size() != end - begin) {
      throw StageError(opts.stage, "scorer returned " + std::to_string(lines.size()) + " score line(s) for " +
                                       std::to_string(end - begin) + " input(s) in batch " + std::to_string(k));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto s = detail::trim(lines[i]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw StageError(opts.stage, "scorer output line " + std::to_string(begin + i + 1) + " is not a number: '" +
                                         std::string(lines[i]) + "'");
      }
      out.records[begin + i].score = v;
      out.records[begin + i].stage_tag = opts.stage;
    }
  });
  return out;
}

/// Per domain, the k highest-scoring records (ties: smaller id first).
/// Output is sorted by id.
inline SampleManifest select_top_k(const SampleManifest& in, std::size_t k_indoor, std::size_t k_outdoor) {
  SampleManifest out;
  out.provenance.stage = in.provenance.stage;
  std::vector<const SampleRecord*> pools[2];
  for (const auto& r : in.records) {
    if (!r.score) throw ArgumentError("select_top_k: record '" + r.id + "' is unscored");
    pools[r.domain == Domain::kIndoor ? 0 : 1].push_back(&r);
  }
  const std::size_t ks[2] = {k_indoor, k_outdoor};
  for (int d = 0; d < 2; ++d) {
    auto& pool = pools[d];
    std::sort(pool.begin(), pool.end(), [](const SampleRecord* a, const SampleRecord* b) {
      if (*a->score != *b->score) return *a->score > *b->score;
      return a->id < b->id;
    });
    if (ks[d] > pool.size()) {
      out.provenance.notes.push_back("warning: k_" + std::string(to_string(d == 0 ? Domain::kIndoor : Domain::kOutdoor)) +
                                     "=" + std::to_string(ks[d]) + " exceeds pool of " +
                                     std::to_string(pool.size()) + "; keeping the whole pool");
    }
    const std::size_t take = std::min(ks[d], pool.size());
    for (std::size_t i = 0; i < take; ++i) out.records.push_back(*pool[i]);
  }
  out.sort_by_id();
  return out;
}

struct MixInput {
  SampleManifest manifest;
  double weight = 1.0;
  std::string tag;  // source tag used to disambiguate duplicate ids
};

/// Repetition count of each input: round(weight / smallest positive weight),
/// at least 1 for a positive weight, 0 for weight 0.
inline std::vector<std::size_t> mix_repetitions(const std::vector<double>& weights) {
  double wmin = 0.0;
  for (double w : weights) {
    if (!(std::isfinite(w) && w >= 0.0)) throw ArgumentError("mix_datasets: weights must be finite and >= 0");
    if (w > 0.0 && (wmin == 0.0 || w < wmin)) wmin = w;
  }
  if (wmin == 0.0) throw ArgumentError("mix_datasets: all weights are zero");
  std::vector<std::size_t> reps;
  for (double w : weights) {
    reps.push_back(w > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(w / wmin))) : 0);
  }
  return reps;
}

/// Weighted concatenation followed by a seeded Fisher–Yates shuffle.
///
/// Ids present in more than one input get "@<tag>" appended; repeated copies
/// of a record get "#<copy>" appended (copy ≥ 1), so the result has unique ids.
inline SampleManifest mix_datasets(const std::vector<MixInput>& inputs, std::uint64_t seed) {
  if (inputs.empty()) throw ArgumentError("mix_datasets: no inputs");
  std::vector<double> weights;
  for (const auto& in : inputs) weights.push_back(in.weight);
  const auto reps = mix_repetitions(weights);

  std::map<std::string, int> owners;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    if (reps[s] == 0) continue;
    std::set<std::string> seen;
    for (const auto& r : inputs[s].manifest.records)
      if (seen.insert(r.id).second) ++owners[r.id];
  }

  SampleManifest out;
  std::string note = "mix seed=" + std::to_string(seed);
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const std::string tag = inputs[s].tag.empty() ? "src" + std::to_string(s) : inputs[s].tag;
    note += " " + tag + ":" + std::to_string(inputs[s].manifest.size()) + "x" + std::to_string(reps[s]);
    for (std::size_t copy = 0; copy < reps[s]; ++copy) {
      for (const auto& r : inputs[s].manifest.records) {
        SampleRecord rec = r;
        if (owners[r.id] > 1) rec.id += "@" + tag;
        if (copy > 0) rec.id += "#" + std::to_string(copy);
        out.records.push_back(std::move(rec));
      }
    }
  }
  Rng rng(seed);
  for (std::size_t i = out.records.size(); i > 1; --i) {
    std::swap(out.records[i - 1], out.records[rng.below(i)]);
  }
  out.provenance.notes.push_back(std::move(note));
  return out;
}

}  // namespace panodepth::curation
