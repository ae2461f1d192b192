// gwspine: simulate branching populations and run the verification suites.
//
// Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage or
// configuration errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gwspine/experiment.hpp"
#include "gwspine/models.hpp"

namespace {

using gwspine::ExperimentConfig;

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out_dir;
};

template <class T>
std::optional<T> env_number(const char* name) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return std::nullopt;
  std::istringstream in(raw);
  T v{};
  in >> v;
  if (!in || !in.eof()) throw gwspine::Error(gwspine::ErrorCode::ConfigError, std::string(name) + " is not a number");
  return v;
}

// Precedence: flag, then environment, then config file.
ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config);
  if (auto s = env_number<std::uint64_t>("GWSPINE_SEED")) cfg.seed = *s;
  if (auto j = env_number<unsigned>("GWSPINE_JOBS")) cfg.jobs = *j;
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.out_dir) cfg.out_dir = *c.out_dir;
  if (cfg.jobs == 0) throw gwspine::Error(gwspine::ErrorCode::ConfigError, "jobs must be positive");
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "YAML experiment config")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "64-bit master seed (overrides GWSPINE_SEED and the config)");
  app->add_option("--jobs", c.jobs, "worker threads (overrides GWSPINE_JOBS and the config)");
  app->add_option("--out-dir", c.out_dir, "directory for reports and CSV files");
}

int run_verify(const Common& common, const std::string& target, const std::optional<std::string>& check) {
  ExperimentConfig cfg = resolve(common);
  std::optional<std::string> only = check;
  if (!target.empty()) {
    const auto suites = gwspine::suite_names();
    if (std::find(suites.begin(), suites.end(), target) != suites.end()) {
      cfg.suite = target;
    } else {
      // A single check of the config or of a built-in suite.
      bool known = false;
      for (const auto& c : gwspine::resolve_checks(cfg)) known = known || c.name == target;
      if (!known) {
        for (const auto& s : suites) {
          for (const auto& c : gwspine::suite_checks(s)) {
            if (c.name == target) {
              cfg.checks.push_back(c);
              known = true;
              break;
            }
          }
          if (known) break;
        }
      }
      if (!known) throw gwspine::Error(gwspine::ErrorCode::UnknownCheck, "no suite or check named '" + target + "'");
      only = target;
    }
  }
  const auto result = gwspine::run_experiment(cfg, only, &std::cerr);
  gwspine::write_outputs(result, cfg.out_dir);
  gwspine::print_summary(std::cout, result);
  std::cout << "report: " << (std::filesystem::path(cfg.out_dir) / "report.json").string() << '\n';
  return result.pass ? 0 : kExitFail;
}

int run_simulate(const Common& common) {
  const ExperimentConfig cfg = resolve(common);
  const gwspine::SimulateConfig sim = cfg.simulate.value_or(gwspine::SimulateConfig{});
  const auto built = gwspine::build_model(sim.model, sim.model_overrides);
  for (const auto& w : built.warnings) std::cerr << "warning: " << w << '\n';
  gwspine::TreeCaps caps;
  caps.max_nodes = cfg.max_nodes;
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = std::filesystem::path(cfg.out_dir) / "snapshots.csv";
  std::ofstream out(path);
  out << gwspine::kSnapshotCsvHeader << '\n';
  const std::uint64_t base = gwspine::derive_key(cfg.seed, gwspine::hash_tag("simulate"));
  for (std::size_t i = 0; i < sim.replicas; ++i) {
    gwspine::Stream rng(gwspine::derive_key(base, i));
    const auto pop =
        gwspine::simulate_population(built.model, sim.horizon, caps, gwspine::RecordSpec::at(sim.times), rng);
    gwspine::write_snapshot_csv(out, i, pop);
    std::cout << "replica " << i << ": " << pop.tree().nodes().size() << " nodes, "
              << pop.snapshot(sim.horizon).nodes.size() << " alive at t=" << sim.horizon << '\n';
  }
  std::cout << "snapshots: " << path.string() << '\n';
  return 0;
}

int run_models_list() {
  for (const auto& m : gwspine::model_catalog()) {
    std::cout << m.name << "  [" << m.state_space << "]\n  " << m.summary << "\n  defaults: " << m.defaults.dump()
              << "\n";
  }
  return 0;
}

int run_plot_data(const std::string& report_path, const std::string& series, const std::string& out_path) {
  std::ifstream in(report_path);
  if (!in) throw gwspine::Error(gwspine::ErrorCode::ConfigError, "cannot read report '" + report_path + "'");
  const auto report = nlohmann::json::parse(in);
  if (series.empty()) {
    for (const auto& id : gwspine::series_ids(report)) std::cout << id << '\n';
    return 0;
  }
  if (out_path.empty()) {
    gwspine::emit_plot_data(report, series, std::cout);
  } else {
    std::ofstream out(out_path);
    gwspine::emit_plot_data(report, series, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching Markov processes on Galton-Watson trees: simulation and spine verification"};
  app.require_subcommand(1);

  Common common;
  std::string target;
  std::optional<std::string> check;
  auto* verify = app.add_subcommand("verify", "run a suite (paper-core) or a single check");
  add_common(verify, common);
  verify->add_option("target", target, "suite or check name; defaults to the config's checks");
  verify->add_option("--check", check, "run only this check");

  Common sim_common;
  auto* simulate = app.add_subcommand("simulate", "simulate populations and write snapshot CSV");
  add_common(simulate, sim_common);

  auto* models = app.add_subcommand("models", "model catalog");
  models->require_subcommand(1);
  models->add_subcommand("list", "list catalog models with default parameters");

  std::string report_path;
  std::string series;
  std::string out_path;
  auto* plot = app.add_subcommand("plot-data", "export series of a report as CSV (series,x,y)");
  plot->add_option("--report", report_path, "report.json from verify")->required();
  plot->add_option("--series", series, "series id, bare series name or 'all'; omit to list");
  plot->add_option("--out", out_path, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return run_verify(common, target, check);
    if (*simulate) return run_simulate(sim_common);
    if (*models) return run_models_list();
    if (*plot) return run_plot_data(report_path, series, out_path);
  } catch (const gwspine::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == gwspine::ErrorCode::ConfigError || e.code() == gwspine::ErrorCode::UnknownCheck ||
                   e.code() == gwspine::ErrorCode::UnknownSeries || e.code() == gwspine::ErrorCode::UnknownModel ||
                   e.code() == gwspine::ErrorCode::InvalidParameters
               ? kExitUsage
               : kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
