#include "mess/fixtures.hpp"

#include <gtest/gtest.h>

#include "mess/search.hpp"
#include "test_support.hpp"

namespace mess {
namespace {

using testing::TempDir;

std::vector<unsigned char> bytes_of(const std::filesystem::path& p) { return mess::detail::slurp(p); }

TEST(Rng, ReferenceValues) {
  // SplitMix64 with seed 0: first outputs of the classic generator.
  EXPECT_EQ(rng::mix(0x9E3779B97F4A7C15ULL), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng::mix(2 * 0x9E3779B97F4A7C15ULL), 0x6E789E6AA1B965F4ULL);
  const double u = rng::uniform(0, 0);
  EXPECT_EQ(u, static_cast<double>(0xE220A8397B1DCDAFULL >> 11) * 0x1.0p-53);
  EXPECT_GE(u, 0.0);
  EXPECT_LT(u, 1.0);
}

TEST(Fixtures, SameSeedIsByteIdentical) {
  TempDir a("fxa"), b("fxb");
  FixtureSpec spec;
  spec.images = 6;
  spec.archs_per_exit = 2;
  gen_synthetic_fixtures(spec, a.path());
  gen_synthetic_fixtures(spec, b.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    EXPECT_EQ(bytes_of(e.path()), bytes_of(b.path() / rel)) << rel;
    ++files;
  }
  // manifest, costs, labels, 3 exits x 2 archs per image
  EXPECT_EQ(files, 2u + 6u * 7u);
  spec.seed = 2;
  TempDir c("fxc");
  gen_synthetic_fixtures(spec, c.path());
  EXPECT_NE(bytes_of(a / "labels/img0000.mt"), bytes_of(c / "labels/img0000.mt"));
}

TEST(Fixtures, SplitsShareTheNetwork) {
  TempDir a("fxa"), b("fxb");
  FixtureSpec spec;
  spec.images = 4;
  gen_synthetic_fixtures(spec, a.path());
  spec.split = 1;
  gen_synthetic_fixtures(spec, b.path());
  EXPECT_EQ(bytes_of(a / "costs.json"), bytes_of(b / "costs.json"));
  EXPECT_NE(bytes_of(a / "labels/img0000.mt"), bytes_of(b / "labels/img0000.mt"));
}

TEST(Fixtures, FilesValidateAndLoad) {
  TempDir dir("fx");
  FixtureSpec spec;
  spec.images = 5;
  const auto set = gen_synthetic_fixtures(spec, dir.path());
  const auto m = load_manifest(dir / "manifest.json");
  EXPECT_EQ(m.images.size(), 5u);
  EXPECT_EQ(m.exit_points, set.placement.exit_points);
  EXPECT_EQ(load_cost_profile(dir / "costs.json"), set.profile);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t n = 0; n < 3; ++n) EXPECT_NO_THROW(m.read_prediction(i, n, 0));
}

TEST(Fixtures, LadderIsMet) {
  TempDir dir("fx");
  FixtureSpec spec;  // 200 images, ladder 0.6 / 0.8 / 0.95
  const auto set = gen_synthetic_fixtures(spec, dir.path());
  for (std::size_t n = 0; n < 3; ++n) {
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < set.manifest.images.size(); ++i) {
      const auto gt = set.manifest.read_ground_truth(i);
      const auto pred = argmax_labels(set.manifest.read_prediction(i, n, 0));
      for (std::size_t p = 0; p < gt.data.size(); ++p) {
        hit += pred.data[p] == gt.data[p];
        ++total;
      }
    }
    EXPECT_NEAR(static_cast<double>(hit) / static_cast<double>(total), spec.ladder[n], 0.03) << "exit " << n;
  }
}

TEST(Fixtures, ConfidenceSeparatesCorrectPixels) {
  TempDir dir("fx");
  FixtureSpec spec;
  spec.images = 20;
  const auto set = gen_synthetic_fixtures(spec, dir.path());
  double right = 0, wrong = 0;
  std::size_t nr = 0, nw = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto gt = set.manifest.read_ground_truth(i);
    const auto pred = set.manifest.read_prediction(i, 0, 0);
    const auto lab = argmax_labels(pred);
    const auto conf = pixel_confidence_map(pred, Estimator::top1);
    for (std::size_t p = 0; p < gt.data.size(); ++p) {
      if (lab.data[p] == gt.data[p]) {
        right += conf.values[p];
        ++nr;
      } else {
        wrong += conf.values[p];
        ++nw;
      }
    }
  }
  EXPECT_GT(right / nr, wrong / nw + 0.2);
}

TEST(Fixtures, ZeroCorrelationDegeneratesSearch) {
  TempDir dir("fx");
  FixtureSpec spec;
  spec.images = 60;
  spec.correlation = 0.0;
  spec.easy_fraction = 0.0;
  const auto set = gen_synthetic_fixtures(spec, dir.path());
  const auto cache = build_calibration_cache(set.manifest, set.placement, set.profile);
  SearchLimits l;
  const auto fin = search({SearchMode::max_acc_given_cost, 1e9}, cache, InferenceSetting::final_only, l);
  const auto r = search({SearchMode::min_cost_given_acc, fin.evaluation.accuracy - 0.01}, cache,
                        InferenceSetting::input_dependent, l);
  ASSERT_TRUE(r.feasible);
  // Without a confidence signal no early exit is worth its head: the search
  // keeps (nearly) every image on one path.
  double early = 0.0;
  for (std::size_t k = 0; k + 1 < r.evaluation.exit_counts.size(); ++k) early += r.evaluation.exit_counts[k];
  EXPECT_LE(early / static_cast<double>(cache.image_count()), 0.1);
  EXPECT_GE(r.evaluation.cost, 0.9 * fin.evaluation.cost);
}

TEST(Fixtures, BadLadder) {
  TempDir dir("fx");
  FixtureSpec spec;
  spec.ladder = {0.8, 0.6};
  try {
    gen_synthetic_fixtures(spec, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadLadder);
  }
  spec.ladder = {0.5, 1.2};
  EXPECT_THROW(gen_synthetic_fixtures(spec, dir.path()), Error);
}

}  // namespace
}  // namespace mess
