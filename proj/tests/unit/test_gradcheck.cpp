#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "panodepth/gradcheck.hpp"

using namespace panodepth;

class GradcheckAllLosses : public ::testing::TestWithParam<std::tuple<std::string_view, int>> {};

TEST_P(GradcheckAllLosses, AnalyticMatchesFiniteDifferences) {
  const auto [loss, seed] = GetParam();
  GradcheckOptions o;
  o.seed = static_cast<std::uint64_t>(seed);
  const auto r = gradcheck(loss, o);
  EXPECT_TRUE(r.passed) << loss << " seed " << seed << ": max rel error " << r.max_rel_error << " at "
                        << r.worst_index << " (analytic " << r.worst_analytic << ", numeric " << r.worst_numeric
                        << ")";
  EXPECT_GT(r.checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradcheckAllLosses,
                         ::testing::Combine(::testing::ValuesIn(kGradcheckLosses), ::testing::Range(0, 5)),
                         [](const auto& info) {
                           return std::string(std::get<0>(info.param)) + "_" +
                                  std::to_string(std::get<1>(info.param));
                         });

TEST(Gradcheck, NormalKinkResolvesWithSmallerStep) {
  GradcheckOptions o;
  o.seed = 9;
  o.step = 1e-7;
  EXPECT_TRUE(gradcheck("normal", o).passed);
}

TEST(Gradcheck, ZeroToleranceFails) {
  GradcheckOptions o;
  o.tolerance = 0.0;
  EXPECT_FALSE(gradcheck("silog", o).passed);
}

TEST(Gradcheck, UnknownLossThrows) {
  EXPECT_THROW(gradcheck("huber", GradcheckOptions{}), ArgumentError);
}

// Central differences on the weighted total, computed here rather than
// through the library helper.
TEST(Gradcheck, TotalGradientAgainstLocalDifferences) {
  const auto g = testutil::random_depth<double>(32, 16, 40);
  const auto p = testutil::random_depth<double>(32, 16, 41);
  LossOptions o;
  o.df_patch_size = 16;
  const auto r = total_loss(p, g, nullptr, nullptr, o);
  ASSERT_TRUE(r.gradient);
  Rng rng(42);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t i = rng.below(p.size());
    if (!p.is_valid(i) || std::abs((*r.gradient)[i]) < 1e-6) continue;
    const double h = 1e-6 * p.value(i);
    Raster<double> up = p.values(), dn = p.values();
    up[i] += h;
    dn[i] -= h;
    const double num = (total_loss(BasicDepthMap<double>(up, p.valid()), g, nullptr, nullptr, o, false).total -
                        total_loss(BasicDepthMap<double>(dn, p.valid()), g, nullptr, nullptr, o, false).total) /
                       (2.0 * h);
    EXPECT_NEAR((*r.gradient)[i], num, 1e-3 * std::max(std::abs(num), 1e-3)) << "pixel " << i;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}
