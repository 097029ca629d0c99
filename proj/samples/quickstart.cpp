// Minimal library tour: builds a synthetic ERP depth map of a box-shaped
// room, perturbs it into a "prediction", then scores it with the losses and
// metrics and writes a few artifacts.
//
//   panodepth_quickstart [out_dir] [loss_config]

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "panodepth/panodepth.hpp"

namespace fs = std::filesystem;
using namespace panodepth;

namespace {

// Distance from the room center to the wall hit along each pixel ray.
DepthMap box_room(int w, int h, Vec3 half_extent) {
  const ErpGrid grid(w, h);
  Raster<float> depth(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Vec3 r = pixel_to_dir(grid, u, v).vec();
      double t = 1e9;
      if (r.x != 0.0) t = std::min(t, half_extent.x / std::abs(r.x));
      if (r.y != 0.0) t = std::min(t, half_extent.y / std::abs(r.y));
      if (r.z != 0.0) t = std::min(t, half_extent.z / std::abs(r.z));
      depth(u, v) = static_cast<float>(t);
    }
  }
  return DepthMap::from_values(std::move(depth));
}

}  // namespace

int main(int argc, char** argv) try {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("quickstart_out");
  fs::create_directories(out);

  const auto gt = box_room(256, 128, {4.0, 1.5, 3.0});
  Rng rng(7);
  Raster<float> noisy(gt.width(), gt.height());
  for (std::size_t i = 0; i < gt.size(); ++i) noisy[i] = gt.value(i) * static_cast<float>(rng.uniform(1.0, 1.15));
  const auto pred = DepthMap::from_values(std::move(noisy));

  LossOptions opts;
  opts.df_patch_size = 32;
  if (argc > 2) opts = load_loss_options(argv[2]);
  const auto gt_mask = gt_range_mask(gt, RangeThreshold(10.0));
  const BinaryMask pred_mask(Raster<float>(gt.width(), gt.height(), 0.9f));
  const auto loss = total_loss(pred, gt, &pred_mask, &gt_mask, opts);
  for (std::size_t k = 0; k < loss.terms.size(); ++k) std::cout << kLossTermNames[k] << " " << loss.terms[k] << "\n";
  std::cout << "total " << loss.total << "\n";

  const auto m = evaluate(pred, gt);
  std::cout << "abs_rel " << m.abs_rel << "  rmse " << m.rmse << "  delta1 " << m.delta1 << "\n";

  io::write_depth(gt, out / "gt.pfm");
  io::write_depth(pred, out / "pred.pfm");
  io::write_pointcloud(backproject(gt), out / "gt.ply");
  const auto rig = icosahedron_rig(90.0, 64);
  io::write_depth(erp_to_perspective(gt, rig[0]).to_depth_map(), out / "patch_00.pfm");
  std::cout << "wrote " << out.string() << "\n";
  return 0;
} catch (const std::exception& e) {
  std::cerr << "quickstart: " << e.what() << "\n";
  return 1;
}
