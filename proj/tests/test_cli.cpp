#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "utopia/cli.hpp"

using namespace utopia;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "utopia");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "utopia_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, SimulateWritesRequestedRows) {
  const auto r = cli({"simulate", "--setup", "1", "--n", "10", "--seed", "0"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(lines(r.out), 11u);  // header plus 10 rows
  EXPECT_EQ(r.out.rfind("x1,y\n", 0), 0u);

  const auto path = scratch("sim.csv");
  EXPECT_EQ(cli({"simulate", "--setup", "mv1", "--n", "5", "--out", path.string()}).code, 0);
  const auto ds = read_dataset_csv(path.string());
  EXPECT_EQ(ds.size(), 5u);
  EXPECT_EQ(ds.dim(), 3u);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({"run"}).code, 2);
  EXPECT_EQ(cli({"run", "--config", scratch("missing.json").string()}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"simulate", "--setup", "9", "--n", "3"}).code, 2);
  EXPECT_EQ(cli({"simulate", "--setup", "1", "--n", "0"}).code, 2);

  const auto bad = scratch("bad.json");
  std::ofstream(bad) << R"({"alpha": 2})";
  const auto r = cli({"run", "--config", bad.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpha"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, VerifyLemmasReportsPass) {
  const auto r = cli({"verify-lemmas"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Q_m: PASS"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("optimal band: PASS"), std::string::npos) << r.out;
}

TEST(Cli, RunIsByteDeterministicAndReportSummarizes) {
  const auto cfg = scratch("small.json");
  std::ofstream(cfg) << R"({"source":"setup1","seed":5,"split":{"pre":200,"opt":50,"adj":50,"test":100},
                            "methods":["utopia","splitcf"]})";
  const auto a = scratch("a.csv"), b = scratch("b.csv"), svg = scratch("a.svg");
  EXPECT_EQ(cli({"run", "--config", cfg.string(), "--out", a.string(), "--svg", svg.string()}).code, 0);
  EXPECT_EQ(cli({"run", "--config", cfg.string(), "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(lines(slurp(a)), 3u);
  EXPECT_NE(slurp(svg).find("<polygon class=\"band\""), std::string::npos);

  const auto r = cli({"report", a.string(), b.string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("method,runs,failures,coverage_mean,coverage_sd,width_mean,width_sd\n", 0), 0u);
  EXPECT_NE(r.out.find("\nutopia-two-step,2,0,"), std::string::npos) << r.out;
  EXPECT_EQ(lines(r.out), 3u);
}

TEST(Cli, MethodFailureExitsOne) {
  const auto cfg = scratch("fail.json");
  std::ofstream(cfg) << R"({"source":"setup1","seed":5,"split":{"pre":200,"opt":40,"adj":50,"test":100},
                            "methods":["sdp","splitcf"],"sdp":{"trace_budget":1e-6}})";
  const auto r = cli({"run", "--config", cfg.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(lines(r.out), 3u);  // the report is still written
  EXPECT_NE(r.err.find("sdp:"), std::string::npos);
}
