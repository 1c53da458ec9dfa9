#include "mess_cli.hpp"

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mess {
namespace {

using testing::TempDir;

struct Run {
  int status;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mess");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

TEST(Cli, ProfileUniformBlocks) {
  TempDir dir("cli");
  write_json({{"blocks", {10, 10, 10, 10, 10, 10}}}, dir / "costs.json");
  const auto r = run({"profile", "--costs", (dir / "costs.json").string(), "--num-exits", "3"});
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("K = [2,4,6]"), std::string::npos) << r.out;
}

TEST(Cli, UnknownFlagPrintsUsage) {
  const auto r = run({"profile", "--bogus"});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).status, 1);
  EXPECT_EQ(run({"--help"}).status, 0);
}

TEST(Cli, LibraryErrorsMapToOne) {
  TempDir dir("cli");
  write_json({{"blocks", {10, 10}}}, dir / "costs.json");
  const auto r = run({"profile", "--costs", (dir / "costs.json").string(), "--num-exits", "3"});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("TooManyExits"), std::string::npos) << r.err;
}

TEST(Cli, EndToEndPipeline) {
  TempDir dir("cli");
  const auto fx = (dir / "fx").string();
  ASSERT_EQ(run({"gen-fixtures", "--out", fx, "--images", "30", "--rows", "16", "--cols", "16"}).status, 0);
  const auto cache = (dir / "cache.bin").string();
  ASSERT_EQ(run({"--threads", "2", "cache", "--manifest", fx + "/manifest.json", "--costs", fx + "/costs.json", "--out",
                 cache})
                .status,
            0);
  const auto inst = (dir / "instance.json").string();
  auto r = run({"search", "--cache", cache, "--setting", "input-dep", "--objective", "min-cost", "--bound", "0.5",
                "--out", inst, "--th-img-grid", "0.2", "0.5", "0.8"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto report = (dir / "report.json").string();
  r = run({"simulate", "--instance", inst, "--manifest", fx + "/manifest.json", "--costs", fx + "/costs.json",
           "--report", report});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto predicted = read_json(inst)["predicted"];
  const auto simulated = read_json(report);
  EXPECT_EQ(predicted["accuracy"].get<double>(), simulated["accuracy"].get<double>());
  EXPECT_EQ(predicted["cost"].get<double>(), simulated["cost"].get<double>());

  r = run({"search", "--cache", cache, "--setting", "anytime", "--objective", "min-cost", "--bound", "0.999",
           "--out", inst});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("binding constraint: accuracy"), std::string::npos) << r.out;
  EXPECT_FALSE(read_json(inst)["feasible"].get<bool>());
}

TEST(Cli, SearchFromManifestAndConfigFile) {
  TempDir dir("cli");
  const auto fx = (dir / "fx").string();
  ASSERT_EQ(run({"gen-fixtures", "--out", fx, "--images", "10", "--rows", "8", "--cols", "8", "--seed", "3"}).status, 0);
  std::ofstream(dir / "search.toml") << "[search]\nsetting = \"budgeted\"\nobjective = \"max-acc\"\nbound = 1000.0\n";
  const auto inst = (dir / "i.json").string();
  const auto r = run({"--config", (dir / "search.toml").string(), "search", "--manifest", fx + "/manifest.json",
                      "--costs", fx + "/costs.json", "--out", inst});
  ASSERT_EQ(r.status, 0) << r.err << r.out;
  EXPECT_EQ(read_json(inst)["setting"], "budgeted");
}

TEST(Cli, ConfidenceAndLoss) {
  TempDir dir("cli");
  write_tensor(testing::make_pred(1, 4, {{0.95f, 0.05f}, {0.8f, 0.2f}, {0.6f, 0.4f}, {0.3f, 0.7f}}), dir / "p.mt");
  auto r = run({"confidence", "--pred", (dir / "p.mt").string(), "--th-pix", "0.7", "--out",
                (dir / "c.mt").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("c_img = 0.5"), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "c.mt"));

  const auto fx = (dir / "fx").string();
  ASSERT_EQ(run({"gen-fixtures", "--out", fx, "--images", "3", "--rows", "8", "--cols", "8"}).status, 0);
  r = run({"eval-loss", "--loss", "pretrain", "--manifest", fx + "/manifest.json", "--batch-index", "2"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["active_exit_set"], (std::vector<int>{1, 2, 3}));
  r = run({"eval-loss", "--loss", "pfd", "--manifest", fx + "/manifest.json", "--exclude-final"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["per_exit_terms"].size(), 2u);
  EXPECT_EQ(run({"eval-loss", "--loss", "bogus", "--manifest", fx + "/manifest.json"}).status, 1);
}

}  // namespace
}  // namespace mess
