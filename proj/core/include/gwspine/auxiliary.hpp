#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gwspine/branching_sim.hpp"
#include "gwspine/stats.hpp"

namespace gwspine {

/// One jump of the spine: epoch, size-biased offspring count H, chosen child
/// I in 1..H, and the kernel seed.
struct SpineJump {
  double time = 0.0;
  int offspring = 0;
  int child = 0;
  std::uint64_t theta = 0;
};

/// Current state of a spine (Y, Lambda) plus its jump count and last jump time.
struct SpineState {
  double t = 0.0;
  State state;
  double mark = 0.0;
  int generation = 0;
  double last_jump = -std::numeric_limits<double>::infinity();

  LineageView view() const { return {t, state, mark, generation, last_jump}; }
};

/// The size-biased auxiliary process: the motion between jumps, jumps at rate
/// r m, H ~ h p_h / m, I uniform in 1..H, restart at F_I^(H)(Y-, theta).
/// Keeps a reference to the model, which must outlive it.
class Spine {
 public:
  /// Throws ZeroMean when m = 0.
  explicit Spine(const BranchingModel& model);

  SpineState start(Stream& rng) const;
  SpineState start_at(const State& x) const { return SpineState{0.0, x}; }

  /// Runs to time t (>= s.t); the state at t is its left limit, which equals
  /// the value at any fixed t almost surely.
  void advance_to(SpineState& s, double t, Stream& rng, std::vector<SpineJump>* jumps = nullptr) const;
  /// Applies one size-biased branching jump at s.t.
  SpineJump jump(SpineState& s, Stream& rng) const;

  /// Splits the lineage at s.t into two sibling legs: H ~ h (h - 1) p_h,
  /// ordered pair I != K uniform, shared theta.
  std::pair<SpineState, SpineState> fork(const SpineState& s, Stream& rng) const;

  double jump_rate() const noexcept { return jump_rate_; }
  const BranchingModel& model() const noexcept { return *model_; }

 private:
  const BranchingModel* model_;
  double jump_rate_;
};

struct AuxiliaryPath {
  std::vector<LineageView> observed;  ///< at the requested times, in order
  std::vector<SpineJump> jumps;
  LineageView terminal;
};

/// Event-driven spine on [0, horizon], observed at `times` (ascending, within
/// [0, horizon]).
AuxiliaryPath simulate_auxiliary(const BranchingModel& model, double horizon, std::span<const double> times,
                                 Stream& rng);

/// Monte Carlo Q_t f from the model's initial law, or from `x` if given.
McEstimate estimate_semigroup(const BranchingModel& model, const StateFn& f, double t, std::optional<State> x,
                              std::size_t n_reps, std::uint64_t seed, unsigned jobs = 1);

enum class OperatorMode { Exact, MonteCarlo };

/// J1 f(x) = sum_k p_k sum_j E f(F_j^(k)(x, theta)) = m E f(F_I^(H)).
/// Exact mode enumerates the support and integrates single-uniform kernels
/// with 64-point Gauss-Legendre; kernels without that form fall back to MC.
McEstimate apply_j1(const BranchingModel& model, const StateFn& f, const State& x, OperatorMode mode,
                    std::size_t n_reps, Stream& rng);

/// J2(f x g)(x) = sum_k p_k sum_{i != j} E f(F_i^(k)) g(F_j^(k)). Exactly zero
/// when no k >= 2 carries mass.
McEstimate apply_j2(const BranchingModel& model, const StateFn& f, const StateFn& g, const State& x,
                    OperatorMode mode, std::size_t n_reps, Stream& rng);

struct StationaryOptions {
  double run_length = 1.0e4;
  double burn_in = -1.0;  ///< negative means 10% of run_length
  double spacing = 0.1;   ///< time between retained samples
  int batches = 32;
  double divergence_bound = 1.0e9;
};

struct StationaryEstimate {
  std::vector<State> states;            ///< retained states after burn-in, time order
  std::vector<double> samples;          ///< their real parts
  std::vector<double> sorted;           ///< same values sorted
  std::array<McEstimate, 4> moments{};  ///< E[x^k], k = 1..4, batch-means SEs

  double cdf(double x) const;
  /// Batch-means estimate of <pi, f>.
  McEstimate mean_of(const StateFn& f, int batches = 32) const;
};

/// Long single-trajectory estimate of the spine's stationary law.
/// Throws DivergenceDetected when |Y| exceeds the bound.
StationaryEstimate estimate_stationary(const BranchingModel& model, const StationaryOptions& opts, Stream& rng);

/// CSV `bin_left,bin_right,mass` over [min, max], then rows `moment,k,E[x^k]`.
void write_stationary_csv(std::ostream& os, const StationaryEstimate& est, int bins = 64);

}  // namespace gwspine
