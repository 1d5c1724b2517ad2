#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kTmp = fs::path(SLAP_TEST_TMP) / "cli";

int bench(const std::string& args, const fs::path& stdout_file = "/dev/null") {
  const std::string cmd = std::string(SLAP_BENCH_EXE) + " " + args + " > " + stdout_file.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kTmp);
    fs::create_directories(kTmp);
    ASSERT_EQ(bench("--deterministic build grid --nodes 49 --strategy grid --mc 10 --seed 3 --out " +
                        (kTmp / "grid.json").string(),
                    kTmp / "build.out"),
              0)
        << slurp(kTmp / "build.out");
    json s = {{"type", "scenario"},
              {"version", 1},
              {"start", {1.5, 1.5, 0.0}},
              {"goals", {{7.5, 1.5, 0.0}}},
              {"max_ticks", 3000},
              {"events", json::array()}};
    std::ofstream(kTmp / "scenario.json") << s.dump(2);
  }

  static fs::path graph() { return kTmp / "grid.json"; }
  static fs::path scenario() { return kTmp / "scenario.json"; }
};

}  // namespace

TEST_F(CliTest, BuildReport) {
  const json report = json::parse(slurp(kTmp / "build.out"));
  EXPECT_EQ(report["nodes"], 49);
  EXPECT_LT(report["max_dare_residual"].get<double>(), 1e-8);
  EXPECT_GT(report["edges"].get<int>(), 0);
  EXPECT_FALSE(report.contains("created_at"));
  EXPECT_TRUE(fs::exists(graph()));
}

TEST_F(CliTest, RunBothPolicies) {
  for (const std::string policy : {"firm", "rollout"}) {
    const fs::path log = kTmp / ("run_" + policy + ".jsonl");
    const fs::path out = kTmp / ("run_" + policy + ".out");
    ASSERT_EQ(bench("run " + graph().string() + " " + scenario().string() + " --policy " + policy +
                        " --seed 4 --log " + log.string(),
                    out),
              0)
        << slurp(out);
    std::ifstream in(log);
    std::string first, line, last;
    std::getline(in, first);
    while (std::getline(in, line)) last = line;
    EXPECT_EQ(json::parse(first)["type"], "header");
    EXPECT_EQ(json::parse(first)["policy"], policy);
    const json summary = json::parse(last);
    EXPECT_EQ(summary["type"], "summary");
    EXPECT_EQ(summary["outcome"], "success");
  }
}

TEST_F(CliTest, CompareWritesSummaryAndCurves) {
  const fs::path dir = kTmp / "compare";
  ASSERT_EQ(bench("compare " + graph().string() + " " + scenario().string() + " --runs 2 --seed 1 --bucket 20 --out " +
                      dir.string(),
                  kTmp / "compare.out"),
            0)
      << slurp(kTmp / "compare.out");
  std::ifstream in(dir / "summary.csv");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 3);
  EXPECT_TRUE(fs::exists(dir / "curve_firm.csv"));
  EXPECT_TRUE(fs::exists(dir / "curve_rollout.csv"));
  EXPECT_TRUE(fs::exists(dir / "runs.csv"));
  EXPECT_TRUE(fs::exists(dir / "buckets.csv"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(bench("--help"), 0);
  EXPECT_EQ(bench("run /no/such/graph.json " + scenario().string()), 2);
  EXPECT_EQ(bench("build grid --nodes 4 --strategy hexagonal --out " + (kTmp / "x.json").string()), 2);
  std::ofstream(kTmp / "bad_env.json") << R"({"type":"environment","version":7})";
  EXPECT_EQ(bench("build " + (kTmp / "bad_env.json").string() + " --out " + (kTmp / "y.json").string()), 2);
  EXPECT_EQ(bench("run " + graph().string() + " " + (kTmp / "bad_env.json").string()), 2);
  EXPECT_EQ(bench("frobnicate"), 2);
  // An unreachable goal budget ends the run without success.
  json s = json::parse(slurp(scenario()));
  s["max_ticks"] = 5;
  std::ofstream(kTmp / "short.json") << s.dump();
  EXPECT_EQ(bench("run " + graph().string() + " " + (kTmp / "short.json").string()), 4);
}

TEST_F(CliTest, DeterministicOutputIsByteIdentical) {
  const fs::path a = kTmp / "det_a.jsonl";
  const fs::path b = kTmp / "det_b.jsonl";
  ASSERT_EQ(bench("--deterministic run " + graph().string() + " " + scenario().string() + " --seed 8 --log " +
                      a.string(),
                  kTmp / "det_a.out"),
            0);
  ASSERT_EQ(bench("--deterministic run " + graph().string() + " " + scenario().string() + " --seed 8 --log " +
                      b.string(),
                  kTmp / "det_b.out"),
            0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(kTmp / "det_a.out"), slurp(kTmp / "det_b.out"));

  const fs::path g2 = kTmp / "grid2.json";
  ASSERT_EQ(bench("--deterministic build grid --nodes 49 --strategy grid --mc 10 --seed 3 --out " + g2.string()), 0);
  EXPECT_EQ(slurp(g2), slurp(graph()));
}
