#include "mess/simulate.hpp"

#include <random>

#include <gtest/gtest.h>

#include "mess/fixtures.hpp"
#include "test_support.hpp"

namespace mess {
namespace {

using testing::TempDir;

struct Deployed {
  TempDir dir{"sim"};
  FixtureSet set;
  CalibrationCache cache;

  Deployed() {
    FixtureSpec spec;
    spec.seed = 9;
    spec.images = 24;
    spec.rows = spec.cols = 16;
    spec.archs_per_exit = 2;
    spec.output_stride = 2;
    set = gen_synthetic_fixtures(spec, dir.path());
    cache = build_calibration_cache(set.manifest, set.placement, set.profile);
  }

  MessInstance instance(const MessConfig& c) const {
    return instance_from_cache(c, cache, CostKind::workload, false);
  }
};

TEST(Simulate, FinalOnlyMatchesMetricsAndCost) {
  Deployed d;
  MessConfig c;
  c.setting = InferenceSetting::final_only;
  c.num_points = 3;
  c.exits = {{2, ExitArch::from_id(32), {}}};
  const auto r = simulate(d.instance(c), d.set.manifest, d.set.profile);
  ConfusionMatrix cm(d.set.manifest.class_count);
  for (std::size_t i = 0; i < d.set.manifest.images.size(); ++i)
    cm += confusion_matrix(argmax_labels(d.set.manifest.read_prediction(i, 2, 32)), d.set.manifest.read_ground_truth(i),
                           d.set.manifest.class_count);
  EXPECT_EQ(r.miou, miou(cm));
  EXPECT_DOUBLE_EQ(r.cost, d.set.profile.total() + d.set.profile.head_cost(d.set.placement[2], 32));
  EXPECT_TRUE(r.expected_latency.has_value());
  EXPECT_EQ(r.exit_counts, std::vector<std::size_t>{24});
}

TEST(Simulate, EqualsCacheEvaluation) {
  Deployed d;
  std::mt19937_64 gen(21);
  const InferenceSetting settings[] = {InferenceSetting::final_only, InferenceSetting::budgeted,
                                       InferenceSetting::anytime, InferenceSetting::input_dependent};
  for (int k = 0; k < 24; ++k) {
    const auto c = testing::random_config(gen, d.cache, settings[k % 4]);
    const auto ev = evaluate_config(c, d.cache);
    const auto r = simulate(d.instance(c), d.set.manifest, d.set.profile, {static_cast<unsigned>(1 + k % 3)});
    EXPECT_EQ(r.accuracy, ev.accuracy);
    EXPECT_EQ(r.cost, ev.cost);
    EXPECT_EQ(r.exit_rates, ev.exit_rates);
    EXPECT_EQ(r.exit_counts, ev.exit_counts);
    EXPECT_EQ(r.confusion, ev.confusion);
  }
}

TEST(Simulate, AnytimeReportsEveryCheckpoint) {
  Deployed d;
  MessConfig c;
  c.setting = InferenceSetting::anytime;
  c.num_points = 3;
  c.exits = {{0, ExitArch::from_id(0), {}}, {1, ExitArch::from_id(32), {}}, {2, ExitArch::from_id(0), {}}};
  const auto r = simulate(d.instance(c), d.set.manifest, d.set.profile);
  ASSERT_EQ(r.per_exit_miou.size(), 3u);
  EXPECT_EQ(r.per_exit_miou[0], r.miou);
  EXPECT_LT(r.per_exit_miou[0], r.per_exit_miou[2]);
}

TEST(Simulate, InstanceJsonRoundTrip) {
  Deployed d;
  std::mt19937_64 gen(4);
  const auto c = testing::random_config(gen, d.cache, InferenceSetting::input_dependent);
  const auto inst = d.instance(c);
  write_json(instance_to_json(inst), d.dir / "instance.json");
  EXPECT_EQ(load_instance(d.dir / "instance.json"), inst);
  const auto r = simulate(inst, d.set.manifest, d.set.profile);
  const auto j = report_to_json(r);
  EXPECT_EQ(j["image_count"], 24);
  EXPECT_EQ(j["images"].size(), 24u);
}

TEST(Simulate, MismatchedManifest) {
  Deployed d;
  MessConfig c;
  c.setting = InferenceSetting::budgeted;
  c.num_points = 3;
  c.exits = {{1, ExitArch::from_id(5), {}}};
  try {
    simulate(d.instance(c), d.set.manifest, d.set.profile);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ManifestMismatch);
  }
  auto inst = d.instance(c);
  inst.placement.exit_points = {1, 2, 3};
  EXPECT_THROW(simulate(inst, d.set.manifest, d.set.profile), Error);
}

}  // namespace
}  // namespace mess
