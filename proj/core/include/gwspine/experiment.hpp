#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gwspine/verify.hpp"

namespace gwspine {

/// One check of an experiment: a kind, an optional catalog model and the
/// kind's parameters. Unset parameters take the check's defaults; every kind
/// also accepts max_nodes, the per-replica node cap.
struct CheckConfig {
  std::string name;
  std::string kind;
  std::string model;                                       ///< empty for model-free kinds
  nlohmann::json model_overrides = nlohmann::json::object();
  nlohmann::json params = nlohmann::json::object();

  bool operator==(const CheckConfig&) const = default;
};

/// Input of the `simulate` subcommand.
struct SimulateConfig {
  std::string model = "yule_splitted_bm";
  nlohmann::json model_overrides = nlohmann::json::object();
  double horizon = 2.0;
  std::size_t replicas = 1;
  std::vector<double> times;  ///< observation times; the horizon is always included

  bool operator==(const SimulateConfig&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::string out_dir = "gwspine-out";
  std::size_t max_nodes = 1'000'000;
  std::string suite;  ///< named suite run before `checks`; empty for none
  std::vector<CheckConfig> checks;
  std::optional<SimulateConfig> simulate;

  bool operator==(const ExperimentConfig&) const = default;

  /// Parses YAML. Unknown keys, unknown kinds or models, and ill-typed values
  /// throw ConfigError.
  static ExperimentConfig parse(std::string_view yaml);
  static ExperimentConfig load(const std::string& path);
  /// YAML that parses back to an equal config.
  std::string to_yaml() const;
};

/// Check kinds and the parameter names each accepts.
const std::vector<std::pair<std::string, std::vector<std::string>>>& check_kinds();

/// Names of the built-in suites.
std::vector<std::string> suite_names();
/// The checks of a built-in suite. Throws UnknownCheck.
std::vector<CheckConfig> suite_checks(std::string_view suite);

/// Checks of the config in run order: the suite's first, then `checks`.
std::vector<CheckConfig> resolve_checks(const ExperimentConfig& config);

/// Runs one check with seed derive_key(seed, hash of its name). Library
/// errors are recorded in the report rather than thrown.
CheckReport run_check(const CheckConfig& check, std::uint64_t seed, unsigned jobs, const TreeCaps& caps);

struct ExperimentResult {
  std::vector<CheckReport> reports;
  nlohmann::json report;  ///< serialized form; independent of the job count
  bool pass = true;
};

/// Runs the checks in order. `only` restricts to one check name (UnknownCheck
/// if absent). Progress lines go to `log` when given.
ExperimentResult run_experiment(const ExperimentConfig& config, std::optional<std::string> only = std::nullopt,
                                std::ostream* log = nullptr);

/// Deterministic JSON text of a report.
std::string report_text(const nlohmann::json& report);

/// Fixed-width summary table: one row per check.
void print_summary(std::ostream& os, const ExperimentResult& result);

/// Series identifiers `check/series` present in a report.
std::vector<std::string> series_ids(const nlohmann::json& report);

/// Tidy CSV `series,x,y` for one series id, a bare series name (all checks
/// carrying it) or "all". Throws UnknownSeries.
void emit_plot_data(const nlohmann::json& report, std::string_view which, std::ostream& os);

/// Writes report.json and one CSV per series into `dir`.
void write_outputs(const ExperimentResult& result, const std::string& dir);

}  // namespace gwspine
