#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gwspine/gw_tree.hpp"
#include "gwspine/kernel.hpp"
#include "gwspine/motion.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/stats.hpp"

namespace gwspine {

/// Starting law: a point mass or a sampler.
struct InitialLaw {
  State point;
  std::function<State(Stream&)> sampler;

  static InitialLaw at(State s) { return InitialLaw{s, {}}; }
  static InitialLaw from(std::function<State(Stream&)> draw) { return InitialLaw{{}, std::move(draw)}; }
  State draw(Stream& rng) const { return sampler ? sampler(rng) : point; }
  bool is_point() const noexcept { return !sampler; }
};

struct BranchingModel {
  std::string name;
  double rate = 1.0;
  OffspringDistribution offspring = OffspringDistribution::yule();
  MotionModel motion;
  BranchingKernel kernel;
  InitialLaw initial;

  /// r (m - 1), the Malthusian parameter.
  double malthus() const { return rate * (offspring.mean() - 1.0); }
  /// Throws InvalidArgument or KernelArityMismatch.
  void validate() const;
};

/// What to keep besides birth and death states. States at observation times
/// are bridged from a per-node path substream, so terminal states never
/// depend on what is recorded. The horizon is always an observation time.
struct RecordSpec {
  std::vector<double> observation_times;
  std::optional<double> path_grid;

  static RecordSpec terminal_only() { return {}; }
  static RecordSpec at(std::vector<double> times) { return RecordSpec{std::move(times), std::nullopt}; }
  static RecordSpec paths(double grid) { return RecordSpec{{}, grid}; }
};

struct Snapshot {
  double t = 0.0;
  std::vector<NodeIndex> nodes;  ///< alive at t, in creation order
  std::vector<State> states;
};

/// Lineage summary at a time: state, genealogy mark Lambda, generation count
/// and the time of the last branching event on the lineage (-inf if none).
struct LineageView {
  double time = 0.0;
  State state;
  double mark = 0.0;
  int generation = 0;
  double last_branch_time = 0.0;
};

/// Ancestral path restricted to a window, with the branching epochs inside it.
struct LineageWindow {
  double from = 0.0;
  double to = 0.0;
  std::vector<PathPoint> path;
  std::vector<double> branch_times;
};

class PopulationRealization;

/// Simulates from an explicit root key. `root_state` overrides the initial law and
/// `root_birth` shifts the clock, which regrows a recorded subtree exactly.
PopulationRealization simulate_population_from(const BranchingModel& model, double horizon, const TreeCaps& caps,
                                               const RecordSpec& record, std::uint64_t root_key,
                                               std::optional<State> root_state = std::nullopt,
                                               double root_birth = 0.0);

/// One realization of the tree-indexed process.
class PopulationRealization {
 public:
  const GWTree& tree() const noexcept { return tree_; }
  double horizon() const noexcept { return tree_.horizon(); }

  /// X^u at alpha(u).
  const State& birth_state(NodeIndex i) const { return birth_.at(i); }
  /// X^u at beta(u)-, or at the horizon for nodes still alive there.
  const State& end_state(NodeIndex i) const { return end_.at(i); }
  /// Lambda^u = sum of log nu over strict ancestors.
  double mark(NodeIndex i) const { return mark_.at(i); }

  bool has_paths() const noexcept { return path_grid_.has_value(); }
  /// Recorded path of node i: birth point, grid points inside the lifetime, end point.
  std::span<const PathPoint> path(NodeIndex i) const;
  std::span<const Snapshot> snapshots() const noexcept { return snapshots_; }
  /// Throws BeyondHorizon, or StateNotRecorded if t was not observed.
  const Snapshot& snapshot(double t) const;

  std::vector<LineageView> alive_lineages(double t) const;
  std::vector<LineageView> dead_lineages(double t) const;
  LineageWindow window(NodeIndex u, double t, double length) const;

 private:
  friend PopulationRealization simulate_population_from(const BranchingModel&, double, const TreeCaps&,
                                                        const RecordSpec&, std::uint64_t, std::optional<State>,
                                                        double);
  GWTree tree_;
  std::vector<State> birth_;
  std::vector<State> end_;
  std::vector<double> mark_;
  std::vector<std::vector<PathPoint>> paths_;
  std::vector<Snapshot> snapshots_;
  std::optional<double> path_grid_;
};

/// Simulates the whole population up to `horizon`. The root key is drawn
/// from `rng`; everything else comes from per-node substreams.
PopulationRealization simulate_population(const BranchingModel& model, double horizon, const TreeCaps& caps,
                                          const RecordSpec& record, Stream& rng);


struct PopulationSum {
  double value = 0.0;
  std::size_t count = 0;
};

using StateFn = std::function<double(const State&)>;

/// Sum of f over V_t, and N_t.
PopulationSum sum_over_alive(const PopulationRealization& pop, double t, const StateFn& f);
/// Sum of f(X^u at beta(u)-) over nodes with beta(u) < t, and D_t.
PopulationSum sum_over_dead(const PopulationRealization& pop, double t, const StateFn& f);
/// Ordered sum over distinct alive pairs of f(X^u) g(X^v); count is N_t.
PopulationSum sum_over_forks(const PopulationRealization& pop, double t, const StateFn& f, const StateFn& g);
/// Sum over u in V_t of phi(ancestral window of u on [t - T, t]). Needs paths.
PopulationSum ancestral_window_functional(const PopulationRealization& pop, double t, double window,
                                          const std::function<double(const LineageWindow&)>& phi);

/// N_t e^{-r(m-1)t}.
double w_proxy(const BranchingModel& model, std::size_t alive, double t);

struct WSample {
  McEstimate summary;
  std::vector<double> samples;
  bool fast_path = false;  ///< drawn from the geometric law, no trees built
};

/// Replica farm of W-proxies. Throws Subcritical when m <= 1. The Yule law
/// uses the geometric fast path unless `build_trees` is set.
WSample estimate_W(const BranchingModel& model, double t, std::size_t n_reps, std::uint64_t seed,
                   unsigned jobs = 1, bool build_trees = false, const TreeCaps& caps = {});

inline constexpr const char* kSnapshotCsvHeader = "replica,label,t,state,type";

/// CSV rows `replica,label,t,state,type` for every snapshot.
void write_snapshot_csv(std::ostream& os, std::size_t replica, const PopulationRealization& pop);

}  // namespace gwspine
