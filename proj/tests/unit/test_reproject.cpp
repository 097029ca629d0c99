#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "panodepth/reproject.hpp"

using namespace panodepth;
using std::numbers::pi;

namespace {

double axis_angle_deg(Vec3 a, Vec3 b) { return std::acos(std::clamp(dot(a, b), -1.0, 1.0)) * 180.0 / pi; }

// Frustum membership written out from the pinhole definition.
bool in_frustum(const PerspectiveCamera& cam, Vec3 d) {
  const Vec3 f = cam.forward().vec();
  const Vec3 up = cam.up().vec();
  const Vec3 right = cross(up, f);
  const double z = dot(d, f);
  if (z <= 0.0) return false;
  const double t = std::tan(cam.fov_deg() * pi / 360.0);
  return std::abs(dot(d, right) / z) <= t && std::abs(dot(d, up) / z) <= t;
}

Vec3 ray_of(int W, int H, int u, int v) {
  const double lon = 2.0 * pi * (u + 0.5) / W - pi;
  const double lat = pi / 2.0 - pi * (v + 0.5) / H;
  return {std::cos(lat) * std::sin(lon), std::sin(lat), std::cos(lat) * std::cos(lon)};
}

}  // namespace

TEST(IcosahedronRig, TwelveCamerasOnVertices) {
  const auto rig = icosahedron_rig();
  ASSERT_EQ(rig.size(), 12u);
  const double g = std::numbers::phi;
  for (const auto& cam : rig.cameras()) {
    const Vec3 f = cam.forward().vec();
    // each axis is a cyclic permutation of (0, ±1, ±φ)/√(1+φ²)
    std::array<double, 3> c{std::abs(f.x), std::abs(f.y), std::abs(f.z)};
    std::sort(c.begin(), c.end());
    const double s = std::sqrt(1.0 + g * g);
    EXPECT_NEAR(c[0], 0.0, 1e-12);
    EXPECT_NEAR(c[1], 1.0 / s, 1e-12);
    EXPECT_NEAR(c[2], g / s, 1e-12);
    EXPECT_NEAR(dot(f, cam.up().vec()), 0.0, 1e-12);
    EXPECT_EQ(cam.fov_deg(), 90.0);
    EXPECT_EQ(cam.size(), 128);
  }
}

TEST(IcosahedronRig, MinimumAxisAngle) {
  const auto rig = icosahedron_rig();
  double min_angle = 180.0;
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = i + 1; j < 12; ++j)
      min_angle = std::min(min_angle, axis_angle_deg(rig[i].forward().vec(), rig[j].forward().vec()));
  EXPECT_NEAR(min_angle, std::acos(1.0 / std::sqrt(5.0)) * 180.0 / pi, 1e-9);
  EXPECT_NEAR(min_angle, 63.435, 1e-3);
}

TEST(IcosahedronRig, UpIsProjectedGlobalY) {
  for (const auto& cam : icosahedron_rig().cameras()) {
    const Vec3 f = cam.forward().vec();
    const Vec3 want = normalized(Vec3{0, 1, 0} - f.y * f);
    EXPECT_NEAR(cam.up().x(), want.x, 1e-12);
    EXPECT_NEAR(cam.up().y(), want.y, 1e-12);
    EXPECT_NEAR(cam.up().z(), want.z, 1e-12);
  }
}

TEST(IcosahedronRig, PoleFallbackUsesZ) {
  const auto up = camera_up_for(Direction(0.0, 1.0, 0.0));
  EXPECT_NEAR(up.z(), 1.0, 1e-12);
}

TEST(IcosahedronRig, NarrowFovNeedsOverride) {
  EXPECT_THROW(icosahedron_rig(40.0), CoverageError);
  EXPECT_THROW(icosahedron_rig(74.9), CoverageError);
  EXPECT_NO_THROW(icosahedron_rig(75.0));
  EXPECT_EQ(icosahedron_rig(40.0, 32, true).size(), 12u);
}

TEST(IcosahedronRig, CoveringRadius) {
  EXPECT_NEAR(icosahedron_covering_radius_deg(), 37.3774, 1e-3);
}

TEST(PerspectiveCamera, RejectsBadArguments) {
  const Direction f(0, 0, 1);
  EXPECT_THROW(PerspectiveCamera(f, Direction(0, 0.1, 1), 90, 8), ArgumentError);
  EXPECT_THROW(PerspectiveCamera(f, Direction(0, 1, 0), 0, 8), ArgumentError);
  EXPECT_THROW(PerspectiveCamera(f, Direction(0, 1, 0), 180, 8), ArgumentError);
  EXPECT_THROW(PerspectiveCamera(f, Direction(0, 1, 0), 90, 1), ArgumentError);
}

TEST(Coverage, FullAtNinetyDegrees) {
  for (auto [W, H] : {std::pair{128, 64}, std::pair{512, 256}}) {
    EXPECT_EQ(coverage_check(icosahedron_rig(90.0, 16), ErpGrid(W, H)), 1.0);
  }
  EXPECT_EQ(coverage_check(icosahedron_rig(75.0, 16), ErpGrid(512, 256)), 1.0);
}

TEST(Coverage, PartialAtFortyDegrees) {
  const double c = coverage_check(icosahedron_rig(40.0, 16, true), ErpGrid(256, 128));
  EXPECT_LT(c, 1.0);
  EXPECT_GT(c, 0.0);
}

TEST(Coverage, SingleCameraMatchesDenseOracle) {
  const PerspectiveCamera cam(Direction(0, 0, 1), Direction(0, 1, 0), 90.0, 16);
  const int W = 512, H = 256;
  std::size_t inside = 0;
  double w_in = 0.0, w_all = 0.0;
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      const Vec3 d = ray_of(W, H, u, v);
      const double w = std::cos(pi / 2.0 - pi * (v + 0.5) / H);
      w_all += w;
      if (in_frustum(cam, d)) {
        ++inside;
        w_in += w;
      }
    }
  }
  const std::vector<PerspectiveCamera> one{cam};
  EXPECT_DOUBLE_EQ(coverage_check(one, ErpGrid(W, H)), static_cast<double>(inside) / (W * H));
  // A 90° square frustum is one cube face: 1/6 of the sphere's solid angle.
  EXPECT_NEAR(w_in / w_all, 1.0 / 6.0, 2e-3);
}

TEST(ErpToPerspective, ConstantStaysConstant) {
  const auto d = DepthMap::constant(64, 32, 7.25f);
  for (const auto& cam : icosahedron_rig(90.0, 24).cameras()) {
    const auto p = erp_to_perspective(d, cam);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      EXPECT_TRUE(p.valid[i]);
      EXPECT_NEAR(p.values[i], 7.25, 1e-12);
    }
  }
}

TEST(ErpToPerspective, SmoothFieldMatchesAnalytic) {
  const int W = 512, H = 256;
  Raster<double> v(W, H);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double lon = 2.0 * pi * (c + 0.5) / W - pi;
      const double lat = pi / 2.0 - pi * (r + 0.5) / H;
      v(c, r) = 2.0 + std::sin(lon) * std::cos(lat);
    }
  }
  const BasicDepthMap<double> d(v, Raster<std::uint8_t>(W, H, 1));
  std::size_t checked = 0;
  for (const auto& cam : icosahedron_rig(90.0, 32).cameras()) {
    const auto p = erp_to_perspective(d, cam);
    for (int b = 0; b < 32; ++b) {
      for (int a = 0; a < 32; ++a) {
        const Vec3 ray = normalized(cam.ray(a, b));
        if (std::abs(ray.y) > std::sin(70.0 * pi / 180.0)) continue;
        // sin θ cos φ is the x component of the unit ray.
        EXPECT_NEAR(p.values(a, b), 2.0 + ray.x, 1e-3);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 10000u);
}

TEST(ErpToPerspective, InvalidSourcePropagates) {
  const int W = 64, H = 32;
  Raster<std::uint8_t> ok(W, H, 1);
  ok(31, 15) = 0;  // near the forward direction
  const DepthMap d(Raster<float>(W, H, 3.0f), ok);
  const PerspectiveCamera cam(Direction(0, 0, 1), Direction(0, 1, 0), 90.0, 32);
  const auto p = erp_to_perspective(d, cam);
  const SamplingPlan plan(cam, ErpGrid(W, H));
  const std::size_t bad = 15u * W + 31u;
  std::size_t invalid = 0;
  for (std::size_t i = 0; i < plan.taps().size(); ++i) {
    const auto& t = plan.taps()[i];
    const bool touches = std::find(t.index.begin(), t.index.end(), bad) != t.index.end();
    EXPECT_EQ(p.valid[i] == 0, touches);
    invalid += touches;
  }
  EXPECT_GT(invalid, 0u);
}

TEST(Adjoint, DotProductTest) {
  const ErpGrid grid(64, 32);
  const auto rig = icosahedron_rig(90.0, 16);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto& cam = rig[static_cast<std::size_t>(trial) % 12];
    std::vector<double> x(grid.size()), y(16 * 16);
    for (auto& e : x) e = rng.uniform(-1.0, 1.0);
    for (auto& e : y) e = rng.uniform(-1.0, 1.0);
    const SamplingPlan plan(cam, grid);
    const auto sx = plan.apply(std::span<const double>(x));
    const auto sty = erp_to_perspective_adjoint(Raster<double>(16, 16, y), cam, grid);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += sx[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * sty[i];
    EXPECT_NEAR(lhs, rhs, 1e-5 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Adjoint, ZeroInZeroOut) {
  const auto cam = icosahedron_rig(90.0, 8)[3];
  const auto g = erp_to_perspective_adjoint(Raster<double>(8, 8, 0.0), cam, ErpGrid(32, 16));
  for (double x : g.data()) EXPECT_EQ(x, 0.0);
}

TEST(Adjoint, SinglePixelScattersToFourWithUnitSum) {
  const ErpGrid grid(32, 16);
  for (const auto& cam : icosahedron_rig(90.0, 8).cameras()) {
    Raster<double> patch(8, 8, 0.0);
    patch(5, 2) = 2.5;
    const auto g = erp_to_perspective_adjoint(patch, cam, grid);
    std::size_t nonzero = 0;
    double sum = 0.0;
    for (double x : g.data()) {
      nonzero += x != 0.0;
      sum += x;
    }
    EXPECT_LE(nonzero, 4u);
    EXPECT_NEAR(sum, 2.5, 1e-12);
  }
}

TEST(Adjoint, ShapeMismatchThrows) {
  const auto cam = icosahedron_rig(90.0, 8)[0];
  EXPECT_THROW(erp_to_perspective_adjoint(Raster<double>(7, 8, 0.0), cam, ErpGrid(32, 16)), ArgumentError);
}
