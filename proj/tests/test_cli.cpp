#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "geomcarve/cli.hpp"
#include "geomcarve/synth.hpp"
#include "json.hpp"

using namespace geomcarve;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
  Json json() const { return Json::parse(out); }
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("geomcarve_cli_") + info->name());
    fs::remove_all(dir_);
    unsetenv("GEOMCARVE_SEED");
  }
  void TearDown() override {
    fs::remove_all(dir_);
    unsetenv("GEOMCARVE_SEED");
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SynthWritesSequence) {
  const Result r = run({"synth", "--preset", "sphere-field", "--frames", "3", "--width", "16", "--height", "12",
                        "--seed", "5", "--out", path("s")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const Json j = r.json();
  EXPECT_EQ(j["preset"], "sphere-field");
  EXPECT_EQ(j["frames"], 3);
  EXPECT_EQ(j["seed"], 5);
  EXPECT_GT(j["valid_pixels"].get<int>(), 0);
  EXPECT_TRUE(fs::exists(dir_ / "s" / "manifest.json"));
}

TEST_F(CliTest, EvalPointsOnIdenticalClouds) {
  ASSERT_EQ(run({"synth", "--out", path("gt")}).code, 0);
  const Result r = run({"eval", "points", "--pred", path("gt"), "--gt", path("gt")});
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"c_l1\": 0.0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"f@0.05\": 1.0"), std::string::npos) << r.out;
  const Json j = r.json();
  EXPECT_EQ(j["f@0.25"], 1.0);
  EXPECT_EQ(j["f@0.5"], 1.0);
  EXPECT_EQ(j["voxel"], 0.02);
}

TEST_F(CliTest, EvalDepthPoseFovAgainstCorruptedCopy) {
  ASSERT_EQ(run({"synth", "--preset", "box-room", "--frames", "4", "--out", path("gt")}).code, 0);
  ASSERT_EQ(run({"synth", "--preset", "box-room", "--frames", "4", "--out", path("pred"), "--global-scale", "2",
                 "--fov-bias", "1.1"})
                .code,
            0);
  const Json depth = run({"eval", "depth", "--pred", path("pred"), "--gt", path("gt"), "--mode", "video"}).json();
  EXPECT_LT(depth["rel"].get<double>(), 1e-6);
  EXPECT_EQ(depth["delta"], 1.0);
  const Json raw = run({"eval", "depth", "--pred", path("pred"), "--gt", path("gt"), "--mode", "none"}).json();
  EXPECT_NEAR(raw["rel"].get<double>(), 1.0, 1e-6);
  const Json pose = run({"eval", "pose", "--pred", path("pred"), "--gt", path("gt")}).json();
  EXPECT_LT(pose["ate"].get<double>(), 1e-9);
  const Json fov = run({"eval", "fov", "--pred", path("pred"), "--gt", path("gt")}).json();
  EXPECT_NEAR(fov["fov_rel"].get<double>(), 0.1, 1e-12);
}

TEST_F(CliTest, CostMatchesTable) {
  const Result r = run({"cost", "--arch", "vggt518", "--frames", "256"});
  ASSERT_EQ(r.code, 0);
  const double t = r.json()["tflops"].get<double>();
  EXPECT_LT(std::abs(t - 818.25) / 818.25, 5e-3);
  EXPECT_NE(r.out.find("818.24000000000001"), std::string::npos) << r.out;
}

TEST_F(CliTest, LossOnPerfectSynthSceneIsZero) {
  for (const char* preset : {"plane", "box-room", "sphere-field"}) {
    for (const char* recipe : {"ours", "vggt"}) {
      const Result r = run({"loss", "--recipe", recipe, "--synth", preset});
      ASSERT_EQ(r.code, 0) << r.out;
      const Json j = r.json();
      EXPECT_EQ(j["total"], 0.0) << preset << " " << recipe;
      for (const auto& [name, v] : j["components"].items()) EXPECT_EQ(v, 0.0) << name;
    }
  }
}

TEST_F(CliTest, LossFromRecipeFile) {
  fs::create_directories(dir_);
  std::ofstream(path("r.json")) << R"({"name": "tiny", "terms": [{"loss": "reg", "target": "depth"}]})";
  const Json j = run({"loss", "--recipe", path("r.json"), "--synth", "plane"}).json();
  EXPECT_EQ(j["recipe"], "tiny");
  EXPECT_EQ(j["total"], 0.0);
}

TEST_F(CliTest, GradcheckAndFusionCheckPass) {
  const Json g = run({"gradcheck", "--seeds", "2"}).json();
  EXPECT_EQ(g["passed"], true);
  EXPECT_LT(g["max_rel_error"].get<double>(), 1e-4);
  const Json f = run({"fusion-check", "--instances", "3"}).json();
  EXPECT_EQ(f["identity_max_abs_diff"], 0.0);
  EXPECT_EQ(f["passed"], true);
}

TEST_F(CliTest, RankTable) {
  fs::create_directories(dir_);
  std::ofstream(path("t.json")) << R"({"methods": ["a", "b"],
      "metrics": [{"name": "rel", "higher_is_better": false}, {"name": "f", "higher_is_better": true}],
      "values": [[0.1, 0.9], [0.2, 0.8]]})";
  const Json j = run({"rank", "--table", path("t.json")}).json();
  EXPECT_EQ(j["ranks"]["a"], 1.0);
  EXPECT_EQ(j["ranks"]["b"], 2.0);
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  const Result r = run({"cost", "--arch", "vggt518", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_EQ(run({"nosuchcommand"}).code, 2);
}

TEST_F(CliTest, RuntimeErrorIsJson) {
  const Result r = run({"cost", "--arch", "gpt4"});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.json().contains("error"));
  ASSERT_EQ(run({"synth", "--out", path("s")}).code, 0);
  const Result again = run({"synth", "--out", path("s")});
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.json()["error"].get<std::string>().find("--force"), std::string::npos);
  EXPECT_EQ(run({"synth", "--out", path("s"), "--force"}).code, 0);
}

TEST_F(CliTest, SeedFromEnvironment) {
  EXPECT_EQ(default_seed(), kDefaultSeed);
  setenv("GEOMCARVE_SEED", "7", 1);
  EXPECT_EQ(default_seed(), 7u);
  const Json j = run({"synth", "--out", path("s")}).json();
  EXPECT_EQ(j["seed"], 7);
  setenv("GEOMCARVE_SEED", "abc", 1);
  EXPECT_THROW(default_seed(), std::exception);
}

TEST_F(CliTest, OutputIsDeterministic) {
  const Result a = run({"loss", "--recipe", "vggt", "--synth", "box-room", "--seed", "3"});
  const Result b = run({"loss", "--recipe", "vggt", "--synth", "box-room", "--seed", "3"});
  EXPECT_EQ(a.out, b.out);
}
