// panodepth: batch front end. JSON reports go to stdout, artifacts to the
// paths given on the command line, diagnostics to stderr.
//
// Exit codes: 0 success, 1 check failed (gradcheck), 2 usage or
// configuration error, 3 runtime failure (I/O, stage failure, no pairs).

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "panodepth/panodepth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace panodepth;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Globals {
  unsigned threads = 1;
  int verbosity = 1;
  std::uint64_t seed = 0;
  bool seed_given = false;

  json to_json() const { return {{"threads", threads}, {"verbosity", verbosity}, {"seed", seed}}; }
};

/// Raised for failures that map to a specific exit code.
struct Exit {
  int code;
  std::string message;
};

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < std::min<std::size_t>(threads, n); ++t) pool.emplace_back(worker);
  worker();
}

bool is_depth_file(const fs::path& p) {
  try {
    io::detect_format(p);
    return true;
  } catch (const ArgumentError&) {
    return false;
  }
}

std::map<std::string, fs::path> depth_files_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_depth_file(e.path())) out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string pred, gt, out;
  double min_depth = 0.01;
  std::optional<double> max_depth;
  bool latitude_weighted = false;
  std::string aggregation = "mean_of_images";
  double png_scale = 256.0;
};

int run_eval(const EvalArgs& a, const Globals& g) {
  EvalConfig cfg{a.min_depth, a.max_depth, a.latitude_weighted};
  try {
    cfg.validate();
  } catch (const ArgumentError& e) {
    throw Exit{kExitUsage, e.what()};
  }
  const Aggregation mode = aggregation_from_string(a.aggregation);

  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
  json skipped = json::array();
  if (fs::is_directory(a.pred) != fs::is_directory(a.gt)) {
    throw Exit{kExitUsage, "--pred and --gt must both be files or both be directories"};
  }
  if (fs::is_directory(a.pred)) {
    const auto preds = depth_files_by_stem(a.pred);
    const auto gts = depth_files_by_stem(a.gt);
    for (const auto& [stem, p] : preds) {
      const auto it = gts.find(stem);
      if (it == gts.end()) {
        skipped.push_back({{"name", stem}, {"reason", "no ground truth with this name"}});
      } else {
        pairs.push_back({stem, {p, it->second}});
      }
    }
    for (const auto& [stem, _] : gts) {
      if (!preds.count(stem)) skipped.push_back({{"name", stem}, {"reason", "no prediction with this name"}});
    }
  } else {
    pairs.push_back({fs::path(a.pred).stem().string(), {a.pred, a.gt}});
  }
  if (pairs.empty()) throw Exit{kExitRuntime, "no prediction / ground-truth pairs matched by file name"};

  std::vector<std::optional<MetricsReport>> reports(pairs.size());
  std::vector<std::string> errors(pairs.size());
  parallel_for(pairs.size(), g.threads, [&](std::size_t i) {
    try {
      const auto pred = io::read_depth(pairs[i].second.first, a.png_scale);
      const auto gt = io::read_depth(pairs[i].second.second, a.png_scale);
      reports[i] = evaluate(pred, gt, cfg);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  json per_image = json::array();
  std::vector<MetricsReport> ok;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!reports[i]) {
      skipped.push_back({{"name", pairs[i].first}, {"reason", errors[i]}});
      continue;
    }
    json r = to_json(*reports[i], cfg);
    r.erase("config");
    r["name"] = pairs[i].first;
    per_image.push_back(std::move(r));
    ok.push_back(*reports[i]);
  }
  if (ok.empty()) throw Exit{kExitRuntime, "no pair could be evaluated: " + skipped.dump()};

  const auto agg = aggregate(ok, mode);
  json report = to_json(agg, cfg);
  report["n_images"] = ok.size();
  report["aggregation"] = std::string(to_string(mode));
  report["per_image"] = per_image;
  report["skipped"] = skipped;
  report["config"]["pred"] = a.pred;
  report["config"]["gt"] = a.gt;
  report["config"]["png_scale"] = a.png_scale;
  report["config"]["aggregation"] = std::string(to_string(mode));
  report["config"]["global"] = g.to_json();
  if (!a.out.empty()) std::ofstream(a.out) << report.dump(2) << '\n';
  emit(report);
  return 0;
}

// ---------------------------------------------------------------------------
// loss

struct LossArgs {
  std::string pred, gt, config, pred_mask, gt_mask, grad_out, mask_grad_out;
  double png_scale = 256.0;
  bool no_distortion = false;
};

void write_gradient(const Raster<double>& g, const fs::path& path) {
  Raster<float> f(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = static_cast<float>(g[i]);
  io::write_raw_f32(f, path, "loss_per_meter");
}

int run_loss(const LossArgs& a, const Globals& g) {
  LossOptions opts;
  if (!a.config.empty()) opts = load_loss_options(a.config);
  if (a.no_distortion) opts.use_distortion = false;
  if (a.pred_mask.empty() != a.gt_mask.empty()) throw Exit{kExitUsage, "--pred-mask and --gt-mask go together"};

  const auto pred = io::read_depth(a.pred, a.png_scale).cast<double>();
  const auto gt = io::read_depth(a.gt, a.png_scale).cast<double>();
  std::optional<BinaryMask> pm, gm;
  if (!a.pred_mask.empty()) {
    pm = io::read_mask(a.pred_mask);
    gm = io::read_mask(a.gt_mask);
  }
  const bool want_grad = !a.grad_out.empty() || !a.mask_grad_out.empty();
  const auto rep = total_loss(pred, gt, pm ? &*pm : nullptr, gm ? &*gm : nullptr, opts, want_grad);
  if (!a.grad_out.empty()) write_gradient(*rep.gradient, a.grad_out);
  if (!a.mask_grad_out.empty()) {
    if (!rep.mask_gradient) throw Exit{kExitUsage, "--mask-grad-out needs --pred-mask and --gt-mask"};
    write_gradient(*rep.mask_gradient, a.mask_grad_out);
  }
  json report = to_json(rep, opts);
  report["config"]["pred"] = a.pred;
  report["config"]["gt"] = a.gt;
  report["config"]["global"] = g.to_json();
  if (!a.grad_out.empty()) report["gradient_file"] = a.grad_out;
  if (!a.mask_grad_out.empty()) report["mask_gradient_file"] = a.mask_grad_out;
  emit(report);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::vector<std::string> losses{"all"};
  int width = 32;
  int height = 16;
  int seeds = 1;
  double tolerance = 1e-3;
  double step = 1e-4;
  int df_patch_size = 16;
};

int run_gradcheck(const GradcheckArgs& a, const Globals& g) {
  std::vector<std::string> losses;
  for (const auto& l : a.losses) {
    if (l == "all") {
      for (auto n : kGradcheckLosses) losses.emplace_back(n);
    } else if (std::find(kGradcheckLosses.begin(), kGradcheckLosses.end(), l) != kGradcheckLosses.end()) {
      losses.push_back(l);
    } else {
      throw Exit{kExitUsage, "unknown loss '" + l + "' (expected silog, df, grad, normal, pts, mask or all)"};
    }
  }
  if (a.seeds < 1) throw Exit{kExitUsage, "--seeds must be >= 1"};
  if (!(a.tolerance >= 0.0)) throw Exit{kExitUsage, "--tolerance must be >= 0"};

  struct Job {
    std::string loss;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& l : losses)
    for (int s = 0; s < a.seeds; ++s) jobs.push_back({l, g.seed + static_cast<std::uint64_t>(s)});
  std::vector<GradcheckResult> results(jobs.size());
  parallel_for(jobs.size(), g.threads, [&](std::size_t i) {
    GradcheckOptions o;
    o.width = a.width;
    o.height = a.height;
    o.seed = jobs[i].seed;
    o.tolerance = a.tolerance;
    o.step = a.step;
    o.df_patch_size = a.df_patch_size;
    results[i] = gradcheck(jobs[i].loss, o);
  });

  bool all_passed = true;
  json rows = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = results[i];
    all_passed = all_passed && r.passed;
    rows.push_back({{"loss", r.loss},
                    {"seed", jobs[i].seed},
                    {"value", r.value},
                    {"max_rel_error", r.max_rel_error},
                    {"checked", r.checked},
                    {"worst_index", r.worst_index},
                    {"worst_analytic", r.worst_analytic},
                    {"worst_numeric", r.worst_numeric},
                    {"passed", r.passed}});
  }
  emit({{"passed", all_passed},
        {"results", rows},
        {"config",
         {{"losses", losses},
          {"width", a.width},
          {"height", a.height},
          {"seeds", a.seeds},
          {"tolerance", a.tolerance},
          {"step", a.step},
          {"df_patch_size", a.df_patch_size},
          {"global", g.to_json()}}}});
  return all_passed ? 0 : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// geometry

struct GeometryArgs {
  int width = 1024;
  int height = 512;
  std::string depth, out;
  double threshold = 100.0;
  std::string masked_out;
  double png_scale = 256.0;
};

int run_distortion_map(const GeometryArgs& a, const Globals& g) {
  const ErpGrid grid(a.width, a.height);
  const auto dm = distortion_map(grid);
  double sum = 0.0, lo = dm.row(0), hi = dm.row(0);
  for (int v = 0; v < dm.height(); ++v) {
    sum += dm.row(v) * dm.width();
    lo = std::min(lo, dm.row(v));
    hi = std::max(hi, dm.row(v));
  }
  if (!a.out.empty()) {
    const auto fmt = io::detect_format(a.out);
    if (fmt.kind == io::DepthFormat::kRawF32) {
      io::write_raw_f32(dm.to_raster(), a.out, "weight");
    } else if (fmt.kind == io::DepthFormat::kPfm) {
      io::write_pfm(DepthMap::from_values(dm.to_raster()), a.out);
    } else {
      throw Exit{kExitUsage, "distortion map is written as .pfm or RAWF32"};
    }
  }
  emit({{"width", a.width},
        {"height", a.height},
        {"mean", sum / static_cast<double>(grid.size())},
        {"min", lo},
        {"max", hi},
        {"output", a.out.empty() ? json(nullptr) : json(a.out)},
        {"config", {{"width", a.width}, {"height", a.height}, {"out", a.out}, {"global", g.to_json()}}}});
  return 0;
}

int run_pointcloud(const GeometryArgs& a, const Globals& g) {
  const auto d = io::read_depth(a.depth, a.png_scale);
  const auto pc = backproject(d);
  io::write_pointcloud(pc, a.out);
  emit({{"points", pc.valid_count()},
        {"output", a.out},
        {"config", {{"depth", a.depth}, {"out", a.out}, {"global", g.to_json()}}}});
  return 0;
}

int run_normals(const GeometryArgs& a, const Globals& g) {
  const auto d = io::read_depth(a.depth, a.png_scale);
  const auto n = normals_from_depth(d);
  io::write_normals(n, a.out);
  std::size_t valid = 0;
  for (auto v : n.valid.data()) valid += v != 0;
  emit({{"valid", valid},
        {"output", a.out},
        {"config", {{"depth", a.depth}, {"out", a.out}, {"global", g.to_json()}}}});
  return 0;
}

int run_rangemask(const GeometryArgs& a, const Globals& g) {
  const auto d = io::read_depth(a.depth, a.png_scale);
  const auto mask = gt_range_mask(d, RangeThreshold(a.threshold));
  io::write_mask(mask, a.out);
  if (!a.masked_out.empty()) io::write_depth(apply_range_mask(d, mask), a.masked_out, a.png_scale);
  emit({{"threshold", a.threshold},
        {"inside", mask.count_ones()},
        {"pixels", mask.size()},
        {"output", a.out},
        {"config",
         {{"depth", a.depth},
          {"threshold", a.threshold},
          {"out", a.out},
          {"masked_out", a.masked_out},
          {"global", g.to_json()}}}});
  return 0;
}

// ---------------------------------------------------------------------------
// reproject

struct ReprojectArgs {
  std::string input, out_dir, format = "pfm";
  double fov = 90.0;
  int size = 128;
  bool allow_gaps = false;
  double png_scale = 256.0;
};

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

int run_reproject(const ReprojectArgs& a, const Globals& g) {
  if (a.format != "pfm" && a.format != "rawf32") throw Exit{kExitUsage, "--format must be pfm or rawf32"};
  const auto d = io::read_depth(a.input, a.png_scale);
  IcosahedronRig rig = [&] {
    try {
      return icosahedron_rig(a.fov, a.size, a.allow_gaps);
    } catch (const CoverageError& e) {
      throw Exit{kExitUsage, std::string(e.what()) + " (pass --allow-gaps to proceed)"};
    }
  }();
  const auto grid = ErpGrid::of(d);
  fs::create_directories(a.out_dir);
  std::vector<PerspectivePatch> patches(rig.size(), PerspectivePatch{{}, {}, rig[0]});
  parallel_for(rig.size(), g.threads, [&](std::size_t k) { patches[k] = erp_to_perspective(d, rig[k]); });

  json cams = json::array();
  for (std::size_t k = 0; k < rig.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "patch_%02zu.%s", k, a.format == "pfm" ? "pfm" : "raw");
    const fs::path path = fs::path(a.out_dir) / name;
    const auto dm = patches[k].to_depth_map();
    if (a.format == "pfm") {
      io::write_pfm(dm, path);
    } else {
      io::write_rawf32_depth(dm, path);
    }
    std::size_t valid = 0;
    for (auto v : patches[k].valid.data()) valid += v != 0;
    cams.push_back({{"index", k},
                    {"file", name},
                    {"forward", vec_json(rig[k].forward().vec())},
                    {"up", vec_json(rig[k].up().vec())},
                    {"right", vec_json(rig[k].right())},
                    {"valid_pixels", valid}});
  }
  json rig_json = {{"fov_deg", a.fov},
                   {"size", a.size},
                   {"coverage", coverage_check(rig, grid)},
                   {"erp_width", grid.width()},
                   {"erp_height", grid.height()},
                   {"cameras", cams}};
  std::ofstream(fs::path(a.out_dir) / "rig.json") << rig_json.dump(2) << '\n';
  rig_json["out_dir"] = a.out_dir;
  rig_json["config"] = {{"input", a.input},   {"fov", a.fov},         {"size", a.size},
                        {"format", a.format}, {"allow_gaps", a.allow_gaps}, {"global", g.to_json()}};
  emit(rig_json);
  return 0;
}

// ---------------------------------------------------------------------------
// curate

struct CurateArgs {
  std::string config;
  std::optional<unsigned> workers;
};

int run_curate(const CurateArgs& a, const Globals& g) {
  auto cfg = curation::load_pipeline_config(a.config);
  if (a.workers) cfg.workers = *a.workers;
  else if (g.threads > 1) cfg.workers = g.threads;
  if (g.seed_given) cfg.seed = g.seed;
  cfg.validate();

  auto listener = [&](const json& event) {
    if (g.verbosity >= 1) std::cerr << event.dump() << '\n';
  };
  json stages = json::array();
  try {
    const auto res = curation::run_pipeline(cfg, listener);
    for (const auto& s : res.stages) {
      stages.push_back({{"stage", s.name},
                        {"status", s.status == curation::StageStatus::kRan ? "ran" : "skipped"},
                        {"config_hash", s.config_hash},
                        {"records", s.output.size()},
                        {"output", (cfg.output_dir / s.name / "output.jsonl").string()},
                        {"files", s.files}});
    }
    json config = curation::to_json(cfg);
    config["global"] = g.to_json();
    emit({{"stages", stages}, {"run_log", res.run_log.string()}, {"config", config}});
  } catch (const StageError& e) {
    throw Exit{kExitRuntime, e.what()};
  }
  return 0;
}

// ---------------------------------------------------------------------------

std::string reference_markdown(CLI::App& app) {
  std::ostringstream md;
  md << "# panodepth command reference\n\n"
     << "Generated by `panodepth reference`. Every subcommand prints a JSON report on standard output;\n"
     << "files are written only to the paths passed as arguments. Each report carries a `config`\n"
     << "object echoing the resolved parameters, including the global flags.\n\n"
     << "## Environment\n\n"
     << "| variable | effect |\n|---|---|\n"
     << "| `PANODEPTH_SEED` | default for `--seed` |\n"
     << "| `PANODEPTH_THREADS` | default for `--threads` |\n\n"
     << "A flag given on the command line wins over the variable.\n\n"
     << "## Exit codes\n\n"
     << "| code | meaning |\n|---|---|\n"
     << "| 0 | requested artifact fully produced |\n"
     << "| 1 | check failed (`gradcheck` above tolerance) |\n"
     << "| 2 | usage or configuration error (message names the flag or config field) |\n"
     << "| 3 | runtime failure: unreadable input, no eval pairs, curation stage failure |\n\n"
     << "## Global options\n\n```\n"
     << app.get_formatter()->make_help(&app, app.get_name(), CLI::AppFormatMode::Normal) << "```\n";
  std::function<void(CLI::App*, const std::string&)> walk = [&](CLI::App* sub, const std::string& prefix) {
    const std::string name = prefix.empty() ? sub->get_name() : prefix + " " + sub->get_name();
    md << "\n## " << name << "\n\n" << sub->get_description() << "\n\n```\n"
       << sub->help("", CLI::AppFormatMode::Sub) << "```\n";
    for (auto* child : sub->get_subcommands({})) walk(child, name);
  };
  for (auto* sub : app.get_subcommands({})) walk(sub, "");
  md << R"(
## Report schemas

`eval`: `abs_rel`, `rmse`, `delta1`, `delta2`, `delta3` (aggregate), `n_valid`, `n_images`,
`aggregation`, `per_image` (same metric fields plus `name`), `skipped` (`name`, `reason`), `config`.

`loss`: `terms` and `counts` keyed by `silog`, `df`, `grad`, `normal`, `pts`, `mask`; `total`;
`config` with `weights`, `silog.lambda`, `grad.sobel_percentile`, `df.fov_deg`, `df.patch_size`,
`distortion.enabled`, `mask.variant`, `mask.bce_pos_weight`. `--grad-out` writes the gradient of the
total with respect to the predicted depth as RAWF32 (`<path>.json` sidecar).

`gradcheck`: `passed`, `results` (per loss and seed: `max_rel_error`, `checked`, worst pixel), `config`.

`reproject ico`: `fov_deg`, `size`, `coverage`, `cameras` (`index`, `file`, `forward`, `up`, `right`);
the same object without `config` is written to `<out-dir>/rig.json`.

`curate`: `stages` (`stage`, `status` = `ran` | `skipped`, `config_hash`, `records`, `output`, `files`),
`run_log`, `config`. Each stage event is also appended to `<output_dir>/run_log.jsonl`.
)";
  return md.str();
}

int real_main(int argc, char** argv) {
  CLI::App app{"Panoramic metric-depth geometry, losses, metrics and curation", "panodepth"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_version_flag("--version", "panodepth 0.1.0");

  Globals g;
  app.add_option("--threads", g.threads, "worker threads for batch work")
      ->envname("PANODEPTH_THREADS")
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--verbosity", g.verbosity, "0 quiet, 1 progress, 2 debug")->check(CLI::Range(0, 2));
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed")->envname("PANODEPTH_SEED");

  // eval
  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Depth metrics (AbsRel, RMSE, delta1-3) for files or directories");
  eval->add_option("--pred", ea.pred, "prediction file or directory")->required();
  eval->add_option("--gt", ea.gt, "ground-truth file or directory (paired by file stem)")->required();
  eval->add_option("--min-depth", ea.min_depth, "ground truth below this is ignored")->capture_default_str();
  eval->add_option("--max-depth", ea.max_depth, "truncate evaluation at this range (meters)");
  eval->add_flag("--latitude-weighted", ea.latitude_weighted, "weight pixels by cos(latitude)");
  eval->add_option("--aggregation", ea.aggregation, "mean_of_images | pixel_pooled")
      ->check(CLI::IsMember({"mean_of_images", "pixel_pooled"}))
      ->capture_default_str();
  eval->add_option("--png-scale", ea.png_scale, "PNG16 counts per meter")->capture_default_str();
  eval->add_option("--out", ea.out, "also write the report here");

  // loss
  LossArgs la;
  auto* loss = app.add_subcommand("loss", "All six loss terms and the weighted total for one pair");
  loss->add_option("--pred", la.pred, "predicted depth")->required()->check(CLI::ExistingFile);
  loss->add_option("--gt", la.gt, "ground-truth depth")->required()->check(CLI::ExistingFile);
  loss->add_option("--config", la.config, "loss config (.toml or .json)")->check(CLI::ExistingFile);
  loss->add_option("--pred-mask", la.pred_mask, "predicted soft range mask (.pfm / RAWF32)")->check(CLI::ExistingFile);
  loss->add_option("--gt-mask", la.gt_mask, "ground-truth range mask (.pfm / RAWF32)")->check(CLI::ExistingFile);
  loss->add_option("--grad-out", la.grad_out, "write d(total)/d(pred) as RAWF32");
  loss->add_option("--mask-grad-out", la.mask_grad_out, "write d(total)/d(pred mask) as RAWF32");
  loss->add_flag("--no-distortion", la.no_distortion, "disable latitude weighting");
  loss->add_option("--png-scale", la.png_scale, "PNG16 counts per meter")->capture_default_str();

  // gradcheck
  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Analytic gradients against central finite differences");
  gc->add_option("--loss", ga.losses, "silog | df | grad | normal | pts | mask | all (repeatable)")
      ->capture_default_str();
  gc->add_option("--width", ga.width, "instance width")->check(CLI::Range(4, 4096))->capture_default_str();
  gc->add_option("--height", ga.height, "instance height")->check(CLI::Range(3, 4096))->capture_default_str();
  gc->add_option("--seeds", ga.seeds, "instances per loss, seeds --seed .. --seed+N-1")->capture_default_str();
  gc->add_option("--tolerance", ga.tolerance, "max relative error")->capture_default_str();
  gc->add_option("--step", ga.step, "relative finite-difference step")->capture_default_str();
  gc->add_option("--df-patch-size", ga.df_patch_size, "patch size of the df rig")->capture_default_str();

  // geometry
  GeometryArgs geo;
  auto* geom = app.add_subcommand("geometry", "ERP geometry utilities");
  geom->require_subcommand(1);
  auto* dmap = geom->add_subcommand("distortion-map", "Per-pixel cos(latitude) weights, mean 1");
  dmap->add_option("--width", geo.width)->check(CLI::Range(2, 1 << 16))->capture_default_str();
  dmap->add_option("--height", geo.height)->check(CLI::Range(1, 1 << 16))->capture_default_str();
  dmap->add_option("--out", geo.out, "output .pfm or RAWF32 file");
  auto* pcl = geom->add_subcommand("pointcloud", "Back-project a depth map to an ASCII PLY point cloud");
  pcl->add_option("--depth", geo.depth)->required()->check(CLI::ExistingFile);
  pcl->add_option("--out", geo.out, "output .ply")->required();
  auto* nrm = geom->add_subcommand("normals", "Surface normals as interleaved RAWF32 xyz");
  nrm->add_option("--depth", geo.depth)->required()->check(CLI::ExistingFile);
  nrm->add_option("--out", geo.out, "output file (sidecar <out>.json)")->required();
  auto* rmask = geom->add_subcommand("rangemask", "Binary mask of gt depth within a range threshold");
  rmask->add_option("--depth", geo.depth)->required()->check(CLI::ExistingFile);
  rmask->add_option("--threshold", geo.threshold, "meters (presets 10, 20, 50, 100)")->capture_default_str();
  rmask->add_option("--out", geo.out, "mask output (.pfm or RAWF32)")->required();
  rmask->add_option("--masked-out", geo.masked_out, "also write the depth with out-of-range pixels invalid");
  for (auto* sub : {pcl, nrm, rmask}) sub->add_option("--png-scale", geo.png_scale)->capture_default_str();

  // reproject
  ReprojectArgs ra;
  auto* rep = app.add_subcommand("reproject", "ERP to perspective patches");
  rep->require_subcommand(1);
  auto* ico = rep->add_subcommand("ico", "12 patches on the icosahedron vertices plus rig.json");
  ico->add_option("--input", ra.input, "ERP depth map")->required()->check(CLI::ExistingFile);
  ico->add_option("--out-dir", ra.out_dir)->required();
  ico->add_option("--fov", ra.fov, "field of view, degrees")->capture_default_str();
  ico->add_option("--size", ra.size, "patch side, pixels")->check(CLI::Range(2, 8192))->capture_default_str();
  ico->add_option("--format", ra.format, "pfm | rawf32")->capture_default_str();
  ico->add_flag("--allow-gaps", ra.allow_gaps, "permit a field of view that leaves the sphere uncovered");
  ico->add_option("--png-scale", ra.png_scale)->capture_default_str();

  // curate
  CurateArgs ca;
  auto* cur = app.add_subcommand("curate", "Run the three-stage curation pipeline from a TOML config");
  cur->add_option("--config", ca.config, "pipeline config")->required()->check(CLI::ExistingFile);
  cur->add_option("--workers", ca.workers, "concurrent labeler / scorer batches (overrides config)");

  // reference
  std::string ref_out;
  auto* ref = app.add_subcommand("reference", "Write the markdown command reference");
  ref->add_option("--out", ref_out, "output path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0 || std::getenv("PANODEPTH_SEED") != nullptr;

  try {
    if (*eval) return run_eval(ea, g);
    if (*loss) return run_loss(la, g);
    if (*gc) return run_gradcheck(ga, g);
    if (*dmap) return run_distortion_map(geo, g);
    if (*pcl) return run_pointcloud(geo, g);
    if (*nrm) return run_normals(geo, g);
    if (*rmask) return run_rangemask(geo, g);
    if (*ico) return run_reproject(ra, g);
    if (*cur) return run_curate(ca, g);
    if (*ref) {
      const auto md = reference_markdown(app);
      if (ref_out.empty()) {
        std::cout << md;
      } else {
        std::ofstream(ref_out) << md;
      }
      return 0;
    }
  } catch (const Exit& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return real_main(argc, argv); }
