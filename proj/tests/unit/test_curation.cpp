#include <gtest/gtest.h>

#include <map>
#include <set>

#include "../support/curation_fixture.hpp"
#include "helpers.hpp"
#include "panodepth/curation/stages.hpp"
#include "panodepth/io.hpp"

using namespace panodepth;
using namespace panodepth::curation;

namespace {

ProcessOptions opts(const fs::path& work, const std::string& stage = "t") {
  ProcessOptions o;
  o.stage = stage;
  o.work_dir = work;
  return o;
}

SampleRecord scored(const std::string& id, double s, Domain d = Domain::kOutdoor) {
  SampleRecord r;
  r.id = id;
  r.image_path = id + ".jpg";
  r.domain = d;
  r.score = s;
  return r;
}

std::vector<std::string> ids(const SampleManifest& m) {
  std::vector<std::string> out;
  for (const auto& r : m.records) out.push_back(r.id);
  return out;
}

std::string stage_error(auto&& fn) {
  try {
    fn();
  } catch (const StageError& e) {
    return e.stage() + ": " + e.what();
  }
  return "<no error>";
}

}  // namespace

// --- manifest --------------------------------------------------------------

TEST(Manifest, JsonlRoundTrip) {
  SampleManifest m;
  m.records = {scored("b", 0.5, Domain::kIndoor), scored("a", -2.0)};
  m.records[1].score.reset();
  m.records[1].depth_path = "a.pfm";
  m.records[1].source = Source::kGenerated;
  m.records[1].stage_tag = "dap";
  const auto back = manifest_from_jsonl(to_jsonl(m));
  EXPECT_EQ(back.records, m.records);
  EXPECT_EQ(to_jsonl(back), to_jsonl(m));
}

TEST(Manifest, RejectsMalformedLines) {
  EXPECT_THROW(manifest_from_jsonl("{\"id\":\"a\"}\n"), ArgumentError);
  EXPECT_THROW(manifest_from_jsonl(R"({"id":"a","image_path":"x","domain":"attic","source":"real"})"), ArgumentError);
  EXPECT_THROW(manifest_from_jsonl(R"({"id":"a","image_path":"x","domain":"indoor","source":"real","z":1})"),
               ArgumentError);
  const std::string dup = R"({"id":"a","image_path":"x","domain":"indoor","source":"real"})";
  EXPECT_THROW(manifest_from_jsonl(dup + "\n" + dup + "\n"), ArgumentError);
  try {
    manifest_from_jsonl(dup + "\n\nnot json\n", "m.jsonl");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("m.jsonl:3"), std::string::npos);
  }
}

// --- labeler ---------------------------------------------------------------

TEST(Labeler, FillsDepthPaths) {
  const auto dir = testutil::scratch_dir("label_ok");
  const auto in = fixture::make_images(dir / "img", "s", 5);
  const auto out = invoke_labeler(in, fixture::labeler_cmd(), dir / "depth", opts(dir / "work"));
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = out.records[i];
    EXPECT_EQ(r.id, in.records[i].id);
    ASSERT_TRUE(r.depth_path);
    const auto d = io::read_depth(*r.depth_path);
    EXPECT_EQ(d.value(0), static_cast<float>(fixture::stub_depth(r.image_path)));
    EXPECT_EQ(r.stage_tag, "t");
  }
  EXPECT_TRUE(out.provenance.notes.empty());
}

TEST(Labeler, BatchesAndWorkersGiveSameResult) {
  const auto dir = testutil::scratch_dir("label_batch");
  const auto in = fixture::make_images(dir / "img", "s", 7);
  auto o = opts(dir / "work");
  o.batch_size = 2;
  o.workers = 3;
  const auto a = invoke_labeler(in, fixture::labeler_cmd(), dir / "d1", o);
  const auto b = invoke_labeler(in, fixture::labeler_cmd(), dir / "d2", opts(dir / "work1"));
  ASSERT_EQ(a.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(a.records[i].id, b.records[i].id);
    EXPECT_EQ(io::read_depth(*a.records[i].depth_path).value(0), io::read_depth(*b.records[i].depth_path).value(0));
  }
  EXPECT_TRUE(fs::exists(dir / "work" / "label_batch_3.txt"));
}

TEST(Labeler, PartialFailureDropsAndLogs) {
  const auto dir = testutil::scratch_dir("label_partial");
  const auto in = fixture::make_images(dir / "img", "s", 3);
  const auto out = invoke_labeler(in, fixture::labeler_cmd("--fail-on s001"), dir / "depth", opts(dir / "work"));
  EXPECT_EQ(ids(out), (std::vector<std::string>{"s000", "s002"}));
  ASSERT_EQ(out.provenance.notes.size(), 2u);
  EXPECT_NE(out.provenance.notes[0].find("s001"), std::string::npos);
  EXPECT_NE(out.provenance.notes[1].find("skipped 1"), std::string::npos);
}

TEST(Labeler, EmptyManifestLaunchesNothing) {
  const auto dir = testutil::scratch_dir("label_empty");
  const auto out = invoke_labeler({}, "/nonexistent/labeler {input_list_path} {output_dir}", dir / "depth",
                                  opts(dir / "work"));
  EXPECT_TRUE(out.empty());
  EXPECT_FALSE(fs::exists(dir / "work"));
}

TEST(Labeler, NonzeroExitIsStageFailureWithOutput) {
  const auto dir = testutil::scratch_dir("label_exit");
  const auto in = fixture::make_images(dir / "img", "s", 2);
  const auto msg = stage_error(
      [&] { invoke_labeler(in, fixture::labeler_cmd("--exit-code 3"), dir / "depth", opts(dir / "work", "lab")); });
  EXPECT_EQ(msg.substr(0, 5), "lab: ");
  EXPECT_NE(msg.find("status 3"), std::string::npos);
  EXPECT_NE(msg.find("stub_labeler"), std::string::npos);  // captured diagnostics
}

TEST(Labeler, MissingImageOrPlaceholderFails) {
  const auto dir = testutil::scratch_dir("label_bad");
  auto in = fixture::make_images(dir / "img", "s", 1);
  EXPECT_THROW(invoke_labeler(in, "labeler {input_list_path}", dir / "depth", opts(dir / "work")), ArgumentError);
  in.records[0].image_path = (dir / "nope.jpg").string();
  EXPECT_THROW(invoke_labeler(in, fixture::labeler_cmd(), dir / "depth", opts(dir / "work")), StageError);
}

// --- scorer ----------------------------------------------------------------

class ScorerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testutil::scratch_dir(std::string("score_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    labeled_ = invoke_labeler(fixture::make_images(dir_ / "img", "s", 3), fixture::labeler_cmd(), dir_ / "depth",
                              opts(dir_ / "work"));
  }
  fs::path dir_;
  SampleManifest labeled_;
};

TEST_F(ScorerTest, ConstantScorer) {
  const auto out = score_samples(labeled_, fixture::scorer_cmd("constant"), opts(dir_ / "work"));
  for (const auto& r : out.records) EXPECT_EQ(r.score, 0.5);
}

TEST_F(ScorerTest, NegatedSizeMatchesOracle) {
  auto o = opts(dir_ / "work");
  o.batch_size = 1;
  o.workers = 2;
  const auto out = score_samples(labeled_, fixture::scorer_cmd(), o);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& r : out.records) EXPECT_EQ(*r.score, fixture::stub_score(r.image_path));
}

TEST_F(ScorerTest, LineCountMismatchIsNamed) {
  const auto msg = stage_error([&] { score_samples(labeled_, fixture::scorer_cmd("short"), opts(dir_ / "w")); });
  EXPECT_NE(msg.find("2 score line(s) for 3 input(s)"), std::string::npos) << msg;
}

TEST_F(ScorerTest, GarbageLineIsNamed) {
  const auto msg = stage_error([&] { score_samples(labeled_, fixture::scorer_cmd("garbage"), opts(dir_ / "w")); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST_F(ScorerTest, ProcessFailure) {
  const auto msg = stage_error([&] { score_samples(labeled_, fixture::scorer_cmd("fail"), opts(dir_ / "w")); });
  EXPECT_NE(msg.find("status 7"), std::string::npos) << msg;
}

TEST_F(ScorerTest, RequiresDepth) {
  auto m = labeled_;
  m.records[1].depth_path.reset();
  EXPECT_THROW(score_samples(m, fixture::scorer_cmd(), opts(dir_ / "w")), StageError);
}

// --- select_top_k ----------------------------------------------------------

TEST(SelectTopK, HandExample) {
  SampleManifest m;
  const double s[] = {3, 1, 4, 1, 5};
  for (int i = 0; i < 5; ++i) m.records.push_back(scored("r" + std::to_string(i), s[i]));
  EXPECT_EQ(ids(select_top_k(m, 0, 2)), (std::vector<std::string>{"r2", "r4"}));
  EXPECT_EQ(ids(select_top_k(m, 0, 5)), (std::vector<std::string>{"r0", "r1", "r2", "r3", "r4"}));
}

TEST(SelectTopK, TiesBreakBySmallerId) {
  SampleManifest m;
  m.records = {scored("b", 1.0), scored("a", 1.0), scored("c", 0.0)};
  EXPECT_EQ(ids(select_top_k(m, 0, 1)), (std::vector<std::string>{"a"}));
}

TEST(SelectTopK, OversizedKWarns) {
  SampleManifest m;
  m.records = {scored("a", 1.0, Domain::kIndoor), scored("b", 2.0)};
  const auto out = select_top_k(m, 5, 1);
  EXPECT_EQ(out.size(), 2u);
  ASSERT_EQ(out.provenance.notes.size(), 1u);
  EXPECT_NE(out.provenance.notes[0].find("k_indoor=5"), std::string::npos);
}

TEST(SelectTopK, UnscoredIsAnError) {
  SampleManifest m;
  m.records = {scored("a", 1.0)};
  m.records[0].score.reset();
  EXPECT_THROW(select_top_k(m, 1, 1), ArgumentError);
}

TEST(SelectTopK, MatchesSortOracleOnRandomManifests) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    SampleManifest m;
    std::vector<std::pair<std::string, double>> in, out;
    const int n = static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      const bool indoor = rng.uniform() < 0.5;
      const double s = std::floor(rng.uniform(0.0, 6.0));  // coarse, so ties are common
      auto r = scored("id" + std::to_string(rng.below(1000000)) + "_" + std::to_string(i), s,
                      indoor ? Domain::kIndoor : Domain::kOutdoor);
      (indoor ? in : out).emplace_back(r.id, s);
      m.records.push_back(r);
    }
    const std::size_t ki = rng.below(12), ko = rng.below(12);
    const auto got = select_top_k(m, ki, ko);
    ASSERT_EQ(ids(got), fixture::top_k_ids(in, out, ki, ko)) << "trial " << trial;
    // Subset with non-increasing scores per domain once re-sorted.
    std::map<std::string, double> by_id;
    for (const auto& r : m.records) by_id[r.id] = *r.score;
    for (const auto& r : got.records) EXPECT_EQ(by_id.at(r.id), *r.score);
  }
}

// --- mix_datasets ----------------------------------------------------------

TEST(Mix, RepetitionArithmetic) {
  SampleManifest a, b;
  for (int i = 0; i < 2; ++i) a.records.push_back(scored("a" + std::to_string(i), 0));
  for (int i = 0; i < 4; ++i) b.records.push_back(scored("b" + std::to_string(i), 0));
  const auto mix = mix_datasets({{a, 2.0, "A"}, {b, 1.0, "B"}}, 7);
  std::size_t from_a = 0, from_b = 0;
  for (const auto& r : mix.records) (r.id[0] == 'a' ? from_a : from_b)++;
  EXPECT_EQ(from_a, 4u);
  EXPECT_EQ(from_b, 4u);
  EXPECT_NO_THROW(mix.check_unique_ids());
  EXPECT_EQ(mix_repetitions({2.0, 1.0}), (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(mix_repetitions({0.3, 1.0, 0.0}), (std::vector<std::size_t>{1, 3, 0}));
  EXPECT_THROW(mix_repetitions({0.0, 0.0}), ArgumentError);
  EXPECT_THROW(mix_repetitions({-1.0, 1.0}), ArgumentError);
}

TEST(Mix, SingleInputIsAPermutation) {
  SampleManifest a;
  for (int i = 0; i < 20; ++i) a.records.push_back(scored("x" + std::to_string(i), i));
  const auto mix = mix_datasets({{a, 1.0, "A"}}, 3);
  auto got = ids(mix), want = ids(a);
  EXPECT_NE(got, want);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  EXPECT_EQ(got, want);
  EXPECT_NE(mix.provenance.notes.at(0).find("seed=3"), std::string::npos);
}

TEST(Mix, DeterministicPerSeed) {
  SampleManifest a;
  for (int i = 0; i < 20; ++i) a.records.push_back(scored("x" + std::to_string(i), i));
  EXPECT_EQ(ids(mix_datasets({{a, 1.0, "A"}}, 11)), ids(mix_datasets({{a, 1.0, "A"}}, 11)));
  EXPECT_NE(ids(mix_datasets({{a, 1.0, "A"}}, 11)), ids(mix_datasets({{a, 1.0, "A"}}, 12)));
}

TEST(Mix, DuplicateIdsGetSourceTags) {
  SampleManifest a, b;
  a.records = {scored("same", 0), scored("only_a", 0)};
  b.records = {scored("same", 0)};
  const auto mix = mix_datasets({{a, 1.0, "A"}, {b, 1.0, "B"}}, 0);
  auto got = ids(mix);
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"only_a", "same@A", "same@B"}));
}
