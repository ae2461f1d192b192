#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gwspine/error.hpp"
#include "gwspine/experiment.hpp"

namespace gwspine {
namespace {

constexpr const char* kSmall = R"(seed: 42
jobs: 1
out_dir: out
checks:
  - name: small_moments
    kind: tree_moments
    params: {t: 0.5, n_reps: 2000}
  - name: small_fixed
    kind: many_to_one_fixed
    model: yule_splitted_bm
    model_overrides: {x0: 0.5}
    params: {function: x2, t: 0.5, n_tree: 500, n_spine: 500}
  - name: small_window
    kind: ancestral_window
    model: yule_splitted_bm
    params: {t: 1.0, window: 0.5, n_tree: 300, n_spine: 2000}
  - name: small_w
    kind: w_law
    model: yule_splitted_bm
    params: {t: 3.0, n_reps: 2000, ks_max: 0.1}
)";

ErrorCode parse_error(const std::string& yaml) {
  try {
    ExperimentConfig::parse(yaml);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

TEST(Config, ParsesAndRoundTrips) {
  const auto cfg = ExperimentConfig::parse(kSmall);
  EXPECT_EQ(cfg.seed, 42u);
  ASSERT_EQ(cfg.checks.size(), 4u);
  EXPECT_EQ(cfg.checks[1].model_overrides.at("x0"), 0.5);
  EXPECT_EQ(ExperimentConfig::parse(cfg.to_yaml()), cfg);
}

TEST(Config, RoundTripsSuiteAndSimulate) {
  ExperimentConfig cfg;
  cfg.suite = "paper-core";
  cfg.simulate = SimulateConfig{"yule_splitted_ou", {{"ou_rate", 2.0}}, 3.0, 4, {1.0, 2.0}};
  EXPECT_EQ(ExperimentConfig::parse(cfg.to_yaml()), cfg);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_EQ(parse_error("seeds: 1\n"), ErrorCode::ConfigError);
  EXPECT_EQ(parse_error("checks:\n  - {name: a, kind: w_law, model: yule_splitted_bm, params: {tt: 1}}\n"),
            ErrorCode::ConfigError);
  EXPECT_EQ(parse_error("checks:\n  - {name: a, kind: nope}\n"), ErrorCode::ConfigError);
  EXPECT_EQ(parse_error("checks:\n  - {name: a, kind: w_law, model: nope}\n"), ErrorCode::ConfigError);
  EXPECT_EQ(parse_error("jobs: 0\n"), ErrorCode::ConfigError);
  EXPECT_EQ(parse_error("suite: other\n"), ErrorCode::ConfigError);
  EXPECT_EQ(parse_error("seed: [1\n"), ErrorCode::ConfigError);
}

TEST(Experiment, EmptyCheckListPasses) {
  const auto result = run_experiment(ExperimentConfig{});
  EXPECT_TRUE(result.pass);
  EXPECT_TRUE(result.reports.empty());
  EXPECT_EQ(result.report.at("total"), 0);
}

TEST(Experiment, ReportIndependentOfJobs) {
  auto cfg = ExperimentConfig::parse(kSmall);
  const auto one = run_experiment(cfg);
  cfg.jobs = 3;
  const auto three = run_experiment(cfg);
  EXPECT_EQ(report_text(one.report), report_text(three.report));
  EXPECT_TRUE(one.pass) << report_text(one.report);
}

TEST(Experiment, OnlyRestrictsAndUnknownThrows) {
  const auto cfg = ExperimentConfig::parse(kSmall);
  const auto result = run_experiment(cfg, "small_moments");
  ASSERT_EQ(result.reports.size(), 1u);
  EXPECT_EQ(result.reports[0].name, "small_moments");
  try {
    run_experiment(cfg, "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownCheck);
  }
}

TEST(Experiment, SuiteIsResolved) {
  const auto checks = suite_checks("paper-core");
  EXPECT_GE(checks.size(), 15u);
  EXPECT_THROW(suite_checks("nope"), Error);
  ExperimentConfig cfg;
  cfg.suite = "paper-core";
  cfg.checks.push_back(CheckConfig{"extra", "tree_moments", "", nlohmann::json::object(), nlohmann::json::object()});
  const auto resolved = resolve_checks(cfg);
  EXPECT_EQ(resolved.size(), checks.size() + 1);
  EXPECT_EQ(resolved.back().name, "extra");
}

TEST(PlotData, TidyCsv) {
  const auto cfg = ExperimentConfig::parse(kSmall);
  const auto result = run_experiment(cfg, "small_w");
  const auto ids = series_ids(result.report);
  ASSERT_FALSE(ids.empty());
  std::ostringstream os;
  emit_plot_data(result.report, ids.front(), os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "series,x,y");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind(ids.front() + ",", 0), 0u) << line;
    ++rows;
  }
  EXPECT_GT(rows, 0u);
  std::ostringstream all;
  emit_plot_data(result.report, "all", all);
  EXPECT_GE(all.str().size(), os.str().size());
  try {
    emit_plot_data(result.report, "nope/nothing", all);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownSeries);
  }
}

TEST(Outputs, WritesReportAndCsv) {
  const auto cfg = ExperimentConfig::parse(kSmall);
  const auto result = run_experiment(cfg, "small_w");
  const auto dir = std::filesystem::temp_directory_path() / "gwspine_outputs_test";
  std::filesystem::remove_all(dir);
  write_outputs(result, dir.string());
  std::ifstream in(dir / "report.json");
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(text.str(), report_text(result.report));
  std::size_t csv = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) csv += e.path().extension() == ".csv" ? 1 : 0;
  EXPECT_EQ(csv, series_ids(result.report).size());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace gwspine
