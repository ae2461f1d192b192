// Acceptance run: the built-in suite at one job, then again at eight jobs for
// the determinism criterion. Prints one PASS/FAIL line per criterion.

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gwspine/experiment.hpp"

namespace {

struct CriterionSpec {
  int id;
  std::string title;
  std::vector<std::string> checks;
  double max_seconds;  ///< runtime budget for the listed checks; 0 for none
};

const std::vector<CriterionSpec> kCriteria = {
    {1, "Yule tree moments and geometric law", {"yule_moments"}, 30.0},
    {2, "general offspring law moments", {"general_moments"}, 0.0},
    {3, "martingale limit W ~ Exp(1)", {"w_law"}, 0.0},
    {4, "many-to-one at fixed time", {"many_to_one_fixed_bm", "many_to_one_fixed_exact"}, 120.0},
    {5, "many-to-one over the whole tree",
     {"many_to_one_tree_bm", "many_to_one_tree_deaths", "many_to_one_tree_subcritical"}, 0.0},
    {6, "fork second moment", {"fork_closed_form", "fork_bm"}, 180.0},
    {7, "law of large numbers, alive population", {"lln_alive_ou", "lln_alive_ou_control"}, 0.0},
    {8, "law of large numbers, dead population", {"lln_dead"}, 0.0},
    {9, "branching Levy central limit theorem", {"levy_clt"}, 0.0},
    {10, "fluctuation bracket", {"fluctuation_bracket"}, 0.0},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria for the gwspine suite"};
  std::string report_path;
  std::uint64_t seed = 1;
  unsigned parallel_jobs = 8;
  app.add_option("--report", report_path, "write the single-job report here");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--jobs", parallel_jobs, "job count of the determinism rerun");
  CLI11_PARSE(app, argc, argv);

  gwspine::ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.suite = "paper-core";
  cfg.jobs = 1;
  const auto serial = gwspine::run_experiment(cfg, std::nullopt, &std::cerr);
  if (!report_path.empty()) std::ofstream(report_path) << gwspine::report_text(serial.report);

  std::map<std::string, const gwspine::CheckReport*> by_name;
  for (const auto& r : serial.reports) by_name[r.name] = &r;

  bool all = true;
  auto line = [&](int id, bool pass, const std::string& title, const std::string& detail) {
    all = all && pass;
    std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << title << "  (" << detail << ")\n";
  };

  for (const auto& c : kCriteria) {
    bool pass = true;
    double seconds = 0.0;
    std::string detail;
    for (const auto& name : c.checks) {
      const auto it = by_name.find(name);
      if (it == by_name.end()) {
        pass = false;
        detail += name + " missing; ";
        continue;
      }
      const auto& r = *it->second;
      pass = pass && r.pass;
      seconds += r.runtime_seconds;
      std::ostringstream d;
      std::size_t met = 0;
      for (const auto& k : r.criteria) met += k.pass ? 1 : 0;
      d << name << ' ' << met << '/' << r.criteria.size() << (r.error ? " error: " + *r.error : "") << "; ";
      detail += d.str();
    }
    if (c.max_seconds <= 0.0 && detail.size() >= 2) detail.resize(detail.size() - 2);
    if (c.max_seconds > 0.0) {
      const bool fast = seconds <= c.max_seconds;
      pass = pass && fast;
      std::ostringstream d;
      d << "runtime " << seconds << " s, budget " << c.max_seconds << " s";
      detail += d.str();
    }
    line(c.id, pass, c.title, detail);
  }

  cfg.jobs = parallel_jobs;
  const auto parallel = gwspine::run_experiment(cfg, std::nullopt, &std::cerr);
  const bool same = gwspine::report_text(serial.report) == gwspine::report_text(parallel.report);
  line(11, same, "byte-identical report across job counts",
       "jobs 1 vs " + std::to_string(parallel_jobs) + (same ? ", identical" : ", reports differ"));

  std::cout << (all ? "all acceptance criteria pass" : "some acceptance criteria fail") << '\n';
  return all ? 0 : 1;
}
