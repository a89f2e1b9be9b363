#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbr/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = bbr::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("bbr_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

const char* kSmallConfig = R"({
  "scenario": "high", "n_points": 2, "iterations": 10,
  "specs": ["ciou", {"loss": "inner-ciou", "ratio": 0.8}, {"loss": "inner-siou", "ratio": 1.2, "theta": 3}]
})";

}  // namespace

TEST(Cli, EvalPrintsJson) {
  const Outcome o = run({"eval", "--anchor", "0,0,10,10", "--gt", "5,0,10,10", "--loss", "iou", "--grad"});
  ASSERT_EQ(o.code, 0) << o.err;
  const json j = json::parse(o.out);
  EXPECT_DOUBLE_EQ(j["loss"].get<double>(), 2.0 / 3.0);
  EXPECT_NEAR(j["grad"]["dx"].get<double>(), -2000.0 / 22500.0, 1e-15);
  EXPECT_EQ(j["spec"]["loss"], "iou");
}

TEST(Cli, EvalInnerAndTerms) {
  const Outcome o = run({"eval", "--anchor=-5,0,10,10", "--gt", "0,0,10,10", "--loss", "inner-siou",
                         "--ratio", "0.8"});
  ASSERT_EQ(o.code, 0) << o.err;
  const json j = json::parse(o.out);
  EXPECT_TRUE(j.contains("inner_iou"));
  EXPECT_NEAR(j["terms"]["lambda"].get<double>(), 0.0, 1e-12);
  EXPECT_FALSE(j.contains("grad"));
}

TEST(Cli, EvalWarnsOnRatioOutsideRecommendedRange) {
  const Outcome o = run({"eval", "--anchor", "0,0,10,10", "--gt", "1,0,10,10", "--loss", "inner-iou",
                         "--ratio", "1.8"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.err.find("warning"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"eval", "--anchor", "0,0,10", "--gt", "0,0,1,1", "--loss", "iou"}).code, 2);
  EXPECT_EQ(run({"eval", "--anchor", "0,0,0,10", "--gt", "0,0,1,1", "--loss", "iou"}).code, 2);
  EXPECT_EQ(run({"eval", "--anchor", "0,0,1,1", "--gt", "0,0,1,1", "--loss", "wiou"}).code, 2);
  EXPECT_EQ(run({"eval", "--anchor", "0,0,1,1", "--gt", "0,0,1,1", "--loss", "inner-iou"}).code, 2);
  EXPECT_EQ(run({"eval", "--anchor", "0,0,1,1", "--gt", "0,0,1,1", "--loss", "siou", "--theta", "9"}).code,
            2);
  EXPECT_EQ(run({"sim", "--config", "/nonexistent/cfg.json", "--out", "/tmp/x"}).code, 2);
}

TEST(Cli, VersionExitsZero) {
  const Outcome o = run({"--version"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("0.1.0"), std::string::npos);
}

TEST(Cli, SimWritesArtifacts) {
  TempDir tmp;
  write_file(tmp.file("cfg.json"), kSmallConfig);
  const Outcome o = run({"sim", "--config", tmp.file("cfg.json"), "--out", tmp.file("out"), "--per-case",
                         "--threads", "1"});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string summary = slurp(tmp.path() / "out" / "summary.csv");
  EXPECT_EQ(summary.rfind("spec,iteration,total_error\n", 0), 0u);
  std::size_t lines = 0;
  for (char c : summary) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 3u * 11u);

  const json m = json::parse(slurp(tmp.path() / "out" / "manifest.json"));
  EXPECT_EQ(m["n_cases"], 686);
  EXPECT_EQ(m["config_digest"].get<std::string>().size(), 64u);
  EXPECT_EQ(m["spec_list"][1], "inner-ciou(0.8)");
  EXPECT_EQ(m["tool_version"], "0.1.0");
  EXPECT_TRUE(m.contains("timestamp"));
  EXPECT_EQ(m["config"]["radius"][1], 3.0);

  const std::string cases = slurp(tmp.path() / "out" / "cases.csv");
  EXPECT_EQ(cases.rfind("spec,case_id,final_iou,clamp_count,e0,", 0), 0u);
}

TEST(Cli, SimIsByteIdenticalAcrossRunsAndThreads) {
  TempDir tmp;
  write_file(tmp.file("cfg.json"), kSmallConfig);
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "1", "8"}) {
    const std::string dir = tmp.file(std::string("run") + std::to_string(outputs.size()));
    ASSERT_EQ(run({"sim", "--config", tmp.file("cfg.json"), "--out", dir, "--threads", threads}).code, 0);
    outputs.push_back(slurp(fs::path(dir) / "summary.csv"));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
}

TEST(Cli, SimSeedOverrideChangesDigest) {
  TempDir tmp;
  write_file(tmp.file("cfg.json"), kSmallConfig);
  ASSERT_EQ(run({"sim", "--config", tmp.file("cfg.json"), "--out", tmp.file("a")}).code, 0);
  ASSERT_EQ(run({"sim", "--config", tmp.file("cfg.json"), "--out", tmp.file("b"), "--seed", "5"}).code, 0);
  const json a = json::parse(slurp(tmp.path() / "a" / "manifest.json"));
  const json b = json::parse(slurp(tmp.path() / "b" / "manifest.json"));
  EXPECT_NE(a["config_digest"], b["config_digest"]);
  EXPECT_EQ(b["seed"], 5);
}

TEST(Cli, SimRejectsBadConfigs) {
  TempDir tmp;
  const auto code_for = [&](const std::string& text) {
    write_file(tmp.file("cfg.json"), text);
    return run({"sim", "--config", tmp.file("cfg.json"), "--out", tmp.file("out")});
  };
  Outcome o = code_for(R"({"scenario": "high", "n_point": 3})");
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("n_point"), std::string::npos);
  o = code_for(R"({"scenario": "high", "n_points": -1})");
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("n_points"), std::string::npos);
  EXPECT_EQ(code_for(R"({"scenario": "medium"})").code, 2);
  EXPECT_EQ(code_for(R"({"n_points": 2})").code, 2);  // no specs
  EXPECT_EQ(code_for(R"({"scenario": "high", "specs": [{"loss": "iou", "colour": 1}]})").code, 2);
  EXPECT_EQ(code_for("{not json").code, 2);
}

TEST(Cli, ConfigRoundTrip) {
  bbr::SimConfig cfg = bbr::low_iou_preset();
  cfg.seed = 42;
  const bbr::SimConfig back = bbr::cli::sim_config_from_json(bbr::cli::to_json(cfg));
  EXPECT_EQ(bbr::cli::config_digest(back), bbr::cli::config_digest(cfg));
  EXPECT_EQ(back.specs.size(), 2u);
  EXPECT_EQ(*back.specs[1].ratio, 1.2);
}

TEST(Cli, SweepDefaultPassesAndWritesCsv) {
  TempDir tmp;
  const Outcome o = run({"sweep", "--out", tmp.file("sweep.csv"), "--report", tmp.file("report.json")});
  ASSERT_EQ(o.code, 0) << o.out << o.err;
  const json j = json::parse(o.out);
  EXPECT_TRUE(j["all_pass"].get<bool>());
  EXPECT_EQ(json::parse(slurp(tmp.path() / "report.json")), j);
  const std::string csv = slurp(tmp.path() / "sweep.csv");
  EXPECT_EQ(csv.rfind("deviation,iou_8,absgrad_8,iou_10,absgrad_10,iou_12,absgrad_12\n", 0), 0u)
      << csv.substr(0, 80);
}

TEST(Cli, SweepCheckFailureAndUsage) {
  TempDir tmp;
  EXPECT_EQ(run({"sweep", "--out", tmp.file("s.csv"), "--samples", "3"}).code, 1);
  EXPECT_EQ(run({"sweep", "--out", tmp.file("s.csv"), "--aux-sides", "10"}).code, 2);
  EXPECT_EQ(run({"sweep", "--out", tmp.file("s.csv"), "--axis", "z"}).code, 2);
  EXPECT_EQ(run({"sweep", "--out", tmp.file("s.csv"), "--range", "5,-5"}).code, 2);
}
