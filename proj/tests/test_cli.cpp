#include "cli.hpp"
#include "test_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace csfusion;
using testutil::expect_error;

namespace {

std::string fixture(const std::string& name) { return std::string(CSFUSION_FIXTURES) + "/" + name; }

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "csfusion");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json parse(const CliRun& r) { return nlohmann::json::parse(r.out); }

}  // namespace

// ---------------------------------------------------------------------------
// CSV ingestion

TEST(Csv, WellFormedFile) {
  const FusedDataset d = cli::ingest_csv(fixture("four_rows.csv"));
  EXPECT_EQ(d.n(), 4);
  EXPECT_EQ(d.px(), 1);
  EXPECT_EQ(d.count_y(), 2);
  EXPECT_EQ(d.y(0)[0], 1.2);
  EXPECT_EQ(d.z(3)[0], 1.5);
}

TEST(Csv, RowErrorNamesTheLine) {
  try {
    cli::ingest_csv(fixture("bad_row.csv"));
    ADD_FAILURE() << "expected RowError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RowError);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(Csv, OnlyOneArm) {
  expect_error(ErrorCode::EmptyArm, [] { cli::ingest_csv(fixture("only_y.csv")); });
}

TEST(Csv, SchemaErrors) {
  auto parse_text = [](const std::string& s) {
    std::istringstream in(s);
    return cli::parse_csv(in);
  };
  expect_error(ErrorCode::SchemaError, [&] { parse_text("x1,y,z\n1,2,\n"); });
  expect_error(ErrorCode::SchemaError, [&] { parse_text("x1,r,y,z,w\n1,1,2,,3\n"); });
  expect_error(ErrorCode::SchemaError, [&] { parse_text("x1,x1,r,y,z\n1,1,1,2,\n"); });
  expect_error(ErrorCode::RowError, [&] { parse_text("x1,r,y,z\n1,2,2,\n0,0,,1\n"); });
  expect_error(ErrorCode::RowError, [&] { parse_text("x1,r,y,z\nabc,1,2,\n0,0,,1\n"); });
  expect_error(ErrorCode::RowError, [&] { parse_text("x1,r,y,z\n1,1,2\n0,0,,1\n"); });
  expect_error(ErrorCode::EmptyArm, [&] { parse_text("x1,r,y,z\n"); });
}

TEST(Csv, ByteOrderMarkAndCrlf) {
  std::istringstream in("\xEF\xBB\xBFx1,r,y,z\r\n0.5,1,1.0,\r\n0.1,0,,2.0\r\n");
  const FusedDataset d = cli::parse_csv(in);
  EXPECT_EQ(d.n(), 2);
  EXPECT_EQ(d.z(1)[0], 2.0);
}

TEST(Csv, MissingFileIsValidationError) {
  const CliRun r = run_cli({"analyze", "--data", fixture("does_not_exist.csv")});
  EXPECT_EQ(r.code, cli::kValidation);
}

// ---------------------------------------------------------------------------
// analyze

TEST(Analyze, ReportIsByteIdenticalAcrossRuns) {
  const std::vector<std::string> args{"analyze", "--data", fixture("product_200.csv"), "--seed", "11"};
  const CliRun a = run_cli(args);
  const CliRun b = run_cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  auto withthreads = args;
  withthreads.insert(withthreads.end(), {"--threads", "4"});
  EXPECT_EQ(run_cli(withthreads).out, a.out);
}

TEST(Analyze, ReportCarriesConfigAndSeeds) {
  const CliRun r = run_cli({"analyze", "--data", fixture("product_200.csv"), "--seed", "11", "--alpha", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_EQ(j["command"], "analyze");
  EXPECT_EQ(j["config"]["alpha"], 0.1);
  EXPECT_EQ(j["seeds"]["seed"], 11);
  EXPECT_EQ(j["data"]["n"], 200);
  EXPECT_LE(j["result"]["lcb"].get<double>(), j["result"]["theta_lower"].get<double>());
}

TEST(Analyze, LargerAlphaNarrows) {
  const CliRun a = run_cli({"analyze", "--data", fixture("product_200.csv"), "--seed", "11", "--alpha", "0.05"});
  const CliRun b = run_cli({"analyze", "--data", fixture("product_200.csv"), "--seed", "11", "--alpha", "0.10"});
  const auto ja = parse(a)["result"];
  const auto jb = parse(b)["result"];
  EXPECT_GT(jb["lcb"].get<double>(), ja["lcb"].get<double>());
  EXPECT_LT(jb["ucb"].get<double>(), ja["ucb"].get<double>());
}

TEST(Analyze, NearConstantZWarns) {
  const CliRun r = run_cli({"analyze", "--data", fixture("constant_z.csv"), "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto warnings = parse(r)["diagnostics"]["warnings"];
  EXPECT_NE(std::find(warnings.begin(), warnings.end(), "DegenerateVariance"), warnings.end()) << r.out;
}

TEST(Analyze, EstimandVariants) {
  for (const std::string est : {"ratio", "threshold:1,2", "contrast:1", "ols"}) {
    const CliRun r = run_cli({"analyze", "--data", fixture("product_200.csv"), "--estimand", est, "--seed", "3"});
    EXPECT_EQ(r.code, 0) << est << ": " << r.err;
  }
  const CliRun ols = run_cli({"analyze", "--data", fixture("product_200.csv"), "--estimand", "ols", "--gradient",
                           "analytic", "--known-propensity", "0.5", "--variance-mode", "regression"});
  ASSERT_EQ(ols.code, 0) << ols.err;
  EXPECT_TRUE(parse(ols).contains("components"));
}

TEST(Analyze, LearnerOptions) {
  const CliRun r = run_cli({"analyze", "--data", fixture("product_200.csv"), "--clip-propensity", "0.05,0.95",
                         "--lambda-grid", "0.1,1,10", "--k-folds", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_EQ(j["config"]["k_folds"], 3);
  EXPECT_EQ(j["config"]["lambda_grid"].size(), 3u);
}

TEST(Analyze, WritesReportFile) {
  const std::string path = ::testing::TempDir() + "csfusion_report.json";
  const CliRun r = run_cli({"analyze", "--data", fixture("four_rows.csv"), "--out", path, "--known-propensity", "0.5"});
  // Four rows cannot give every training fold both arms.
  EXPECT_EQ(r.code, cli::kValidation) << r.err;
  const CliRun ok = run_cli({"analyze", "--data", fixture("product_200.csv"), "--out", path});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_TRUE(ok.out.empty());
  std::ifstream f(path);
  EXPECT_NO_THROW(nlohmann::json::parse(f));
}

// ---------------------------------------------------------------------------
// Exit codes

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(cli::exit_code_for(ErrorCode::RowError), cli::kValidation);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::SchemaError), cli::kValidation);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::EmptyArm), cli::kValidation);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::SingularComposition), cli::kEstimation);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::NonFiniteEvaluation), cli::kEstimation);
}

TEST(ExitCodes, Usage) {
  EXPECT_EQ(run_cli({}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"analyze"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"analyze", "--data", fixture("product_200.csv"), "--alpha", "2"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"analyze", "--data", fixture("product_200.csv"), "--estimand", "nope"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"simulate", "--dgp", "gaussian"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"oracle-check", "--instances", "0", "--location-scale", "0"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsage);
}

TEST(ExitCodes, ValidationErrors) {
  EXPECT_EQ(run_cli({"analyze", "--data", fixture("bad_row.csv")}).code, cli::kValidation);
  EXPECT_EQ(run_cli({"analyze", "--data", fixture("only_y.csv")}).code, cli::kValidation);
}

TEST(Version, PrintsIdentifier) {
  const CliRun r = run_cli({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("csfusion " + cli::version()), std::string::npos);
}

// ---------------------------------------------------------------------------
// simulate and oracle-check

TEST(Simulate, DeterministicAcrossRunsAndThreads) {
  const std::vector<std::string> base{"simulate", "--dgp", "gaussian", "--n", "200", "--reps", "6",
                                      "--seed", "5", "--p-x", "4", "--records"};
  auto one = base;
  one.insert(one.end(), {"--threads", "1"});
  auto three = base;
  three.insert(three.end(), {"--threads", "3"});
  const CliRun a = run_cli(one);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(run_cli(one).out, a.out);
  EXPECT_EQ(run_cli(three).out, a.out);
  const auto j = parse(a);
  EXPECT_EQ(j["summary"]["records"].size(), 6u);
  EXPECT_TRUE(j.contains("true_bounds"));
}

TEST(Simulate, Sweep) {
  const CliRun r = run_cli({"simulate", "--dgp", "heavy_tail", "--n", "200", "--reps", "3", "--seed", "5", "--p-x",
                         "3", "--sigma-z", "0.2", "--sweep", "1,2,4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_EQ(j["sweep"].size(), 3u);
  EXPECT_TRUE(j.contains("width_fit"));
}

TEST(OracleCheck, PassesAndReports) {
  const CliRun r = run_cli({"oracle-check", "--instances", "50", "--location-scale", "10", "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_TRUE(j["result"]["ok"].get<bool>());
  EXPECT_EQ(j["result"]["sandwich_violations"], 0);
}
