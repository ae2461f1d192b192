#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gwspine/auxiliary.hpp"
#include "gwspine/branching_sim.hpp"
#include "gwspine/stats.hpp"

namespace gwspine {

/// One pass/fail line inside a check: `value relation threshold`.
struct Criterion {
  std::string label;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation = "<=";
  bool pass = false;
};

/// Long-format plot data: rows (series, x, y).
struct Series {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;
};

struct CheckReport {
  std::string name;
  std::string kind;
  McEstimate lhs;
  McEstimate rhs;
  double z = 0.0;
  double z_max = 4.0;
  bool pass = false;
  std::vector<Criterion> criteria;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<Series> series;
  std::optional<std::string> error;
  double runtime_seconds = 0.0;  ///< informational, never serialized

  /// Adds a criterion and returns whether it passed.
  bool require(std::string label, double value, std::string relation, double threshold);
  /// Records the primary two-sample comparison as lhs/rhs/z and as a criterion.
  void set_primary(const McEstimate& l, const McEstimate& r, double z_limit);
  /// pass = no error and every criterion passed.
  void finalize();
};

nlohmann::json to_json(const CheckReport& report);
nlohmann::json to_json(const McEstimate& e);

/// Seed and parallelism for one check. Sides of a check draw from disjoint
/// substreams of `seed`.
struct CheckContext {
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  TreeCaps caps;
};

using LineageFn = std::function<double(const LineageView&)>;
/// Functional of the time s and the lineage at s-.
using TimedLineageFn = std::function<double(double, const LineageView&)>;

/// A test function with its first two derivatives.
struct SmoothFunction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
};

/// Known names: one, x, x2, x3, x4, gauss (exp(-x^2)), cos. Throws InvalidArgument.
SmoothFunction smooth_function(std::string_view name);

// Tree moments: N_t, N_t^2 and D_t against the closed forms; for the Yule law
// also a chi-square fit of N_t to the geometric law.
struct TreeMomentsOptions {
  double t = 1.0;
  std::size_t n_reps = 100000;
  double z_max = 4.0;
  double min_p_value = 1e-3;
};
CheckReport check_tree_moments(const OffspringDistribution& d, double r, const TreeMomentsOptions& opts,
                               const CheckContext& ctx);

// W law: KS of N_t e^{-r(m-1)t} against Exp(1) (Yule) and mean 1.
struct WLawOptions {
  double t = 8.0;
  std::size_t n_reps = 10000;
  double ks_max = 0.02;
  double z_max = 4.0;
  bool build_trees = false;
};
CheckReport check_w_law(const BranchingModel& model, const WLawOptions& opts, const CheckContext& ctx);

// Many-to-one at a fixed time: E[sum_{V_t} f] / E[N_t] against E[f(spine)].
struct FixedTimeOptions {
  double t = 2.0;
  std::size_t n_tree = 100000;
  std::size_t n_spine = 100000;
  double z_max = 4.0;
  std::optional<double> exact;  ///< closed-form value both sides must match
};
CheckReport check_many_to_one_fixed(const BranchingModel& model, const LineageFn& f, const FixedTimeOptions& opts,
                                    const CheckContext& ctx);

// Many-to-one over the whole tree. `f` is the smooth part; the check applies
// the window 1{s < T} itself, so the quadrature sees the left limit at T.
struct WholeTreeOptions {
  double horizon = 2.0;  ///< T
  std::size_t n_tree = 100000;
  std::size_t n_spine = 100000;
  int quad_points = 64;
  double z_max = 4.0;
  std::optional<double> exact;
  std::optional<double> exact_z_max;  ///< tighter bound against `exact`, if any
};
CheckReport check_many_to_one_tree(const BranchingModel& model, const TimedLineageFn& f, const WholeTreeOptions& opts,
                                   const CheckContext& ctx);

// Fork second moment at fixed time, right side by the two-legged spine.
struct ForkOptions {
  double t = 1.0;
  std::size_t n_tree = 100000;
  std::size_t n_spine = 100000;
  double z_max = 4.0;
  bool closed_form = false;  ///< compare both sides with the moment formula (f = g = 1)
};
CheckReport check_fork_second_moment(const BranchingModel& model, const StateFn& f, const StateFn& g,
                                     const ForkOptions& opts, const CheckContext& ctx);

// Law of large numbers for the alive population.
struct LlnAliveOptions {
  std::vector<double> times{2.0, 4.0, 6.0, 10.0};
  std::size_t n_reps = 200;
  std::size_t min_surviving = 200;
  double ks_max = 0.02;
  double trend_slack = 0.01;
  StationaryOptions stationary;
  /// Analytic stationary CDF; when set it replaces the long-run oracle.
  std::function<double(double)> analytic_cdf;
  std::string analytic_label;
};
CheckReport check_lln_alive(const BranchingModel& model, const LlnAliveOptions& opts, const CheckContext& ctx);

// Law of large numbers for the dead population and its lifetime-start variant.
struct LlnDeadOptions {
  double t = 12.0;
  std::size_t n_reps = 200;
  double z_max = 4.0;
  StationaryOptions stationary;
  std::string function = "gauss";
};
CheckReport check_lln_dead(const BranchingModel& model, const LlnDeadOptions& opts, const CheckContext& ctx);

/// Drift and variance of the branching Levy CLT, in closed form.
struct LevyMoments {
  double drift = 0.0;
  double variance = 0.0;
};
LevyMoments levy_clt_moments(const BranchingModel& model);

struct LevyCltOptions {
  double t = 8.0;
  std::size_t n_reps = 400;
  double z_max = 4.0;
  double var_rel_tol = 0.05;
  double ks_max = 0.02;
};
CheckReport check_levy_clt(const BranchingModel& model, const LevyCltOptions& opts, const CheckContext& ctx);

struct FluctuationOptions {
  double T = 1.0;
  double t = 1.0;
  double grid = 1.0 / 256.0;
  std::size_t n_reps = 10000;
  double tol_rel = 0.10;
  double z_max = 4.0;
  int quad_points = 16;
  std::string function = "gauss";
  bool stationary_variance = true;  ///< informational V(f) from a long spine run
  StationaryOptions stationary{2000.0, 200.0, 0.1, 32, 1e9};
};
CheckReport check_fluctuation_bracket(const BranchingModel& model, const FluctuationOptions& opts,
                                      const CheckContext& ctx);

// Tree-side ancestral window vs spine: phi = 1{a branching epoch in [t - T, t]}.
struct WindowOptions {
  double t = 3.0;
  double window = 1.0;
  double grid = 0.25;
  std::size_t n_tree = 20000;
  std::size_t n_spine = 100000;
  double z_max = 4.0;
};
CheckReport check_ancestral_window(const BranchingModel& model, const WindowOptions& opts, const CheckContext& ctx);

}  // namespace gwspine
