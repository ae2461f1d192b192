#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gwspine/rng.hpp"

namespace gwspine {

/// Particle state: a real value plus an optional type mark (the aging model
/// uses types 0 and 1; every other model leaves type at 0).
struct State {
  double x = 0.0;
  int type = 0;

  friend bool operator==(const State&, const State&) = default;
};

struct PathPoint {
  double t = 0.0;
  State state;
};

// Diffusion convention throughout: dX = b dt + sigma dB, so the generator is
// L f = b f' + (sigma^2 / 2) f''.

/// Brownian motion with constant drift; vol = 0 gives deterministic linear drift.
struct BrownianMotion {
  double drift = 0.0;
  double vol = 1.0;
};

/// b(x) = -rate (x - mean), constant vol. Exact Gaussian transition.
struct OrnsteinUhlenbeck {
  double rate = 1.0;
  double mean = 0.0;
  double vol = 1.0;
};

/// Type-dependent Brownian motion for two-type states.
struct TwoTypeBrownian {
  std::array<double, 2> drift{0.0, 0.0};
  std::array<double, 2> vol{0.0, 0.0};
};

/// General diffusion integrated by Euler-Maruyama with step min(step, dt).
struct EulerDiffusion {
  std::function<double(double)> drift;
  std::function<double(double)> vol;
  double step = 1.0 / 1024.0;
};

using BaseMotion = std::variant<BrownianMotion, OrnsteinUhlenbeck, TwoTypeBrownian, EulerDiffusion>;

/// Finite-activity jump component layered on the base motion: at rate `rate`
/// the state is replaced by `apply(state, rng)`.
struct JumpComponent {
  double rate = 0.0;
  std::function<State(const State&, Stream&)> apply;
  std::string label;
};

struct JumpAtom {
  double size = 0.0;
  double prob = 0.0;
};

/// Parameters of a finite-activity Levy motion, as given (before the
/// small-jump compensator is folded into the drift).
struct LevyParameters {
  double drift = 0.0;
  double vol = 0.0;
  double jump_rate = 0.0;
  std::vector<JumpAtom> jumps;
};

/// One piece of a traced segment: base motion between two jumps.
struct TracePiece {
  double t0 = 0.0;
  double t1 = 0.0;
  State start;
  State end;                    ///< left limit at t1
  std::vector<PathPoint> steps;  ///< Euler grid, only for EulerDiffusion
};
using Trace = std::vector<TracePiece>;

/// Motion of a particle between branching events.
///
/// Immutable and shareable; all randomness comes from the caller's stream.
/// Exact transitions are used for Brownian, Ornstein-Uhlenbeck and constant
/// drift; EulerDiffusion falls back to Euler-Maruyama.
class MotionModel {
 public:
  MotionModel() : base_(BrownianMotion{0.0, 0.0}) {}
  explicit MotionModel(BaseMotion base, std::optional<JumpComponent> jumps = std::nullopt);

  static MotionModel still() { return MotionModel(BrownianMotion{0.0, 0.0}); }
  static MotionModel brownian(double drift, double vol) { return MotionModel(BrownianMotion{drift, vol}); }
  static MotionModel deterministic(double drift) { return MotionModel(BrownianMotion{drift, 0.0}); }
  static MotionModel deterministic(std::function<double(double)> drift, double step = 1.0 / 1024.0);
  static MotionModel ornstein_uhlenbeck(double rate, double mean, double vol) {
    return MotionModel(OrnsteinUhlenbeck{rate, mean, vol});
  }
  static MotionModel diffusion(std::function<double(double)> drift, std::function<double(double)> vol,
                               double step = 1.0 / 1024.0);
  /// Brownian part plus compound Poisson jumps; jumps with |y| < 1 are
  /// compensated in the drift so the generator matches the Levy-Khintchine form.
  static MotionModel levy(const LevyParameters& params);

  MotionModel with_jumps(JumpComponent jumps) const;

  /// One sample of X_dt given X_0 = x. Throws NonFiniteState.
  State evolve(const State& x, double dt, Stream& rng) const;

  /// Path on {0, grid, 2 grid, ..., dt}. The endpoint is exactly
  /// evolve(x, dt, rng) for the same stream state; interior points are bridged
  /// from a key drawn afterwards.
  std::vector<PathPoint> evolve_path(const State& x, double dt, double grid, Stream& rng) const;

  /// evolve, additionally recording the pieces between jumps when `trace` is set.
  State evolve_traced(const State& x, double dt, Stream& rng, Trace* trace) const;

  /// Conditional samples at `times` (ascending, inside the traced span,
  /// relative to the trace's own clock) given the trace.
  void fill_from_trace(const Trace& trace, std::span<const double> times, Stream& rng,
                       std::vector<PathPoint>& out) const;

  double drift_at(const State& x) const;
  double vol_at(const State& x) const;

  bool has_jumps() const noexcept { return jumps_.has_value() && jumps_->rate > 0.0; }
  const std::optional<JumpComponent>& jumps() const noexcept { return jumps_; }
  const std::optional<LevyParameters>& levy_parameters() const noexcept { return levy_; }
  const BaseMotion& base() const noexcept { return base_; }
  bool is_still() const noexcept;

 private:
  State evolve_base(const State& x, double dt, Stream& rng, TracePiece* piece) const;
  State bridge_base(const TracePiece& piece, double t_prev, const State& x_prev, double t,
                    Stream& rng) const;

  BaseMotion base_;
  std::optional<JumpComponent> jumps_;
  std::optional<LevyParameters> levy_;
};

}  // namespace gwspine
