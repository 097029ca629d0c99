#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "panodepth/geometry.hpp"
#include "panodepth/io.hpp"

using namespace panodepth;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

void expect_bit_identical(const DepthMap& a, const DepthMap& b) {
  ASSERT_EQ(a.width(), b.width());
  ASSERT_EQ(a.height(), b.height());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.is_valid(i), b.is_valid(i)) << i;
    if (a.is_valid(i)) {
      ASSERT_EQ(std::bit_cast<std::uint32_t>(a.value(i)), std::bit_cast<std::uint32_t>(b.value(i)));
    }
  }
}

std::uint64_t format_offset(auto&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no FormatError";
  return ~0ull;
}

}  // namespace

TEST(Pfm, RoundTripIsBitIdentical) {
  const auto dir = testutil::scratch_dir("pfm_rt");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int w = 1 + static_cast<int>(seed % 7) * 5, h = 1 + static_cast<int>(seed % 5) * 3;
    const auto d = testutil::random_depth<float>(w, h, seed, 1e-3, 1e4, 0.1);
    io::write_depth(d, dir / "d.pfm");
    expect_bit_identical(d, io::read_depth(dir / "d.pfm"));
  }
}

TEST(Pfm, LayoutIsBottomUpLittleEndian) {
  const auto dir = testutil::scratch_dir("pfm_layout");
  const auto d = DepthMap::from_values(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
  io::write_pfm(d, dir / "d.pfm");
  const std::string bytes = slurp(dir / "d.pfm");
  const std::string header = "Pf\n2 2\n-1.0\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  float body[4];
  std::memcpy(body, bytes.data() + header.size(), 16);
  EXPECT_EQ(body[0], 3.0f);  // bottom row first
  EXPECT_EQ(body[1], 4.0f);
  EXPECT_EQ(body[2], 1.0f);
  EXPECT_EQ(body[3], 2.0f);
}

TEST(Pfm, ReadsBigEndianPayload) {
  const auto dir = testutil::scratch_dir("pfm_be");
  std::string bytes = "Pf\n2 1\n1.0\n";
  for (float f : {5.5f, 0.25f}) {
    const std::uint32_t be = __builtin_bswap32(std::bit_cast<std::uint32_t>(f));
    bytes.append(reinterpret_cast<const char*>(&be), 4);
  }
  spit(dir / "be.pfm", bytes);
  const auto d = io::read_pfm(dir / "be.pfm");
  EXPECT_EQ(d.value(0), 5.5f);
  EXPECT_EQ(d.value(1), 0.25f);
}

TEST(Pfm, FormatErrorsCarryOffsets) {
  const auto dir = testutil::scratch_dir("pfm_err");
  spit(dir / "magic.pfm", "P6\n2 2\n-1\n");
  EXPECT_EQ(format_offset([&] { io::read_pfm(dir / "magic.pfm"); }), 0u);
  spit(dir / "dims.pfm", "Pf\n2 x\n-1\n");
  EXPECT_EQ(format_offset([&] { io::read_pfm(dir / "dims.pfm"); }), 5u);
  spit(dir / "huge.pfm", "Pf\n100000 2\n-1\n");
  EXPECT_EQ(format_offset([&] { io::read_pfm(dir / "huge.pfm"); }), 9u);
  const std::string trunc = "Pf\n2 2\n-1.0\n" + std::string(10, '\0');
  spit(dir / "trunc.pfm", trunc);
  EXPECT_EQ(format_offset([&] { io::read_pfm(dir / "trunc.pfm"); }), trunc.size());
  spit(dir / "scale.pfm", "Pf\n1 1\n0\n....");
  EXPECT_EQ(format_offset([&] { io::read_pfm(dir / "scale.pfm"); }), 7u);
  spit(dir / "empty.pfm", "");
  EXPECT_EQ(format_offset([&] { io::read_pfm(dir / "empty.pfm"); }), 0u);
  EXPECT_THROW(io::read_pfm(dir / "missing.pfm"), std::runtime_error);
}

TEST(RawF32, RoundTripIsBitIdentical) {
  const auto dir = testutil::scratch_dir("raw_rt");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto d = testutil::random_depth<float>(9, 4, seed, 1e-3, 1e4, 0.1);
    io::write_depth(d, dir / "d.raw");
    expect_bit_identical(d, io::read_depth(dir / "d.raw"));
  }
  const auto meta = nlohmann::json::parse(slurp(dir / "d.raw.json"));
  EXPECT_EQ(meta["width"], 9);
  EXPECT_EQ(meta["height"], 4);
  EXPECT_EQ(meta["unit"], "m");
}

TEST(RawF32, SizeMismatchAndBadSidecar) {
  const auto dir = testutil::scratch_dir("raw_err");
  io::write_depth(DepthMap::constant(4, 4, 1.0f), dir / "d.raw");
  spit(dir / "d.raw.json", R"({"width": 5, "height": 4, "unit": "m"})");
  EXPECT_EQ(format_offset([&] { io::read_depth(dir / "d.raw"); }), 64u);
  spit(dir / "d.raw.json", R"({"width": 4)");
  EXPECT_THROW(io::read_depth(dir / "d.raw"), FormatError);
  spit(dir / "d.raw.json", R"({"width": 4, "height": 4, "unit": "mm"})");
  EXPECT_THROW(io::read_depth(dir / "d.raw"), FormatError);
}

TEST(Png16, QuantizationBound) {
  const auto dir = testutil::scratch_dir("png");
  for (double scale : {256.0, 1000.0}) {
    // Stay below the largest representable depth, 65535 / scale.
    const auto d = testutil::random_depth<float>(64, 32, 7, 0.01, std::min(255.0, 65535.0 / scale - 0.01), 0.1);
    io::write_png16(d, dir / "d.png", scale);
    const auto r = io::read_png16(dir / "d.png", scale);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      ASSERT_EQ(d.is_valid(i), r.is_valid(i));
      if (d.is_valid(i)) worst = std::max(worst, std::abs(double(d.value(i)) - double(r.value(i))));
    }
    // Half a count, plus float rounding of the stored value for scales that
    // are not powers of two.
    const double slack = scale == 256.0 ? 0.0 : 65.535 * std::numeric_limits<float>::epsilon();
    EXPECT_LE(worst, 1.0 / (2.0 * scale) + slack) << scale;
  }
}

TEST(Png16, ZeroIsInvalidAndClamped) {
  const auto dir = testutil::scratch_dir("png_zero");
  Raster<float> v(3, 1, std::vector<float>{0.001f, 2.0f, 1000.0f});
  const DepthMap d(v, Raster<std::uint8_t>(3, 1, 1));
  io::write_png16(d, dir / "z.png", 256.0);
  const auto r = io::read_png16(dir / "z.png", 256.0);
  EXPECT_FALSE(r.is_valid(0));
  EXPECT_EQ(r.value(1), 2.0f);
  EXPECT_FLOAT_EQ(r.value(2), 65535.0f / 256.0f);
  io::write_depth(DepthMap::from_values(2, 1, {0.0f, 1.0f}), dir / "i.png");
  EXPECT_FALSE(io::read_depth(dir / "i.png").is_valid(0));
}

TEST(Png16, RejectsNonPngAndBadScale) {
  const auto dir = testutil::scratch_dir("png_err");
  spit(dir / "x.png", "not a png at all");
  EXPECT_EQ(format_offset([&] { io::read_png16(dir / "x.png", 256.0); }), 0u);
  EXPECT_THROW(io::DepthFileFormat::png16(0.0), ArgumentError);
  EXPECT_THROW(io::detect_format("a.exr"), ArgumentError);
}

TEST(Ply, HeaderCountsValidPoints) {
  const auto dir = testutil::scratch_dir("ply");
  Raster<std::uint8_t> ok(3, 2, 0);
  ok[0] = ok[2] = ok[5] = 1;
  const BasicDepthMap<double> d(Raster<double>(3, 2, 2.0), ok);
  io::write_pointcloud(backproject(d), dir / "p.ply");
  const std::string text = slurp(dir / "p.ply");
  EXPECT_NE(text.find("element vertex 3\n"), std::string::npos);
  std::istringstream in(text.substr(text.find("end_header\n") + 11));
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 3);
}

TEST(Ply, ConstantDepthIsASphere) {
  const auto dir = testutil::scratch_dir("ply_sphere");
  io::write_pointcloud(backproject(BasicDepthMap<double>::constant(32, 16, 3.5)), dir / "s.ply");
  std::istringstream in(slurp(dir / "s.ply"));
  std::string line;
  while (std::getline(in, line) && line != "end_header") {
  }
  int n = 0;
  for (double x, y, z; in >> x >> y >> z; ++n) EXPECT_NEAR(std::sqrt(x * x + y * y + z * z), 3.5, 1e-7);
  EXPECT_EQ(n, 32 * 16);
}

TEST(Ply, NoValidPointsIsAnError) {
  const BasicDepthMap<double> none(Raster<double>(2, 2, 1.0), Raster<std::uint8_t>(2, 2, 0));
  EXPECT_THROW(io::write_pointcloud(backproject(none), testutil::scratch_dir("ply_none") / "x.ply"), ArgumentError);
}

TEST(Masks, RoundTripBothFormats) {
  const auto dir = testutil::scratch_dir("mask");
  const BinaryMask m(4, 2, {0.0f, 0.25f, 1.0f, 0.5f, 1.0f, 0.0f, 0.75f, 1.0f});
  for (const char* name : {"m.pfm", "m.raw"}) {
    io::write_mask(m, dir / name);
    const auto r = io::read_mask(dir / name);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(r[i], m[i]) << name << " " << i;
  }
  EXPECT_THROW(io::write_mask(m, dir / "m.png"), ArgumentError);
}

TEST(Normals, InterleavedWithSidecar) {
  const auto dir = testutil::scratch_dir("normals");
  const auto n = normals_from_depth(BasicDepthMap<double>::constant(16, 8, 2.0));
  io::write_normals(n, dir / "n.raw");
  const std::string bytes = slurp(dir / "n.raw");
  ASSERT_EQ(bytes.size(), 16u * 8u * 3u * 4u);
  const auto meta = nlohmann::json::parse(slurp(dir / "n.raw.json"));
  EXPECT_EQ(meta["channels"], 3);
  float xyz[3];
  std::memcpy(xyz, bytes.data() + 3 * 4 * (4 * 16 + 5), 12);
  EXPECT_NEAR(std::sqrt(xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2]), 1.0, 1e-5);
}
