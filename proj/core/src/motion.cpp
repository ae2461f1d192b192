#include "gwspine/motion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwspine/error.hpp"

namespace gwspine {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_finite(const State& s) {
  if (!std::isfinite(s.x)) throw Error(ErrorCode::NonFiniteState, "motion produced a non-finite state");
}

int type_index(const State& s) { return s.type == 0 ? 0 : 1; }

/// Brownian bridge with variance rate vol^2 from (t0, x0) to (t1, x1), sampled at t.
double brownian_bridge(double t0, double x0, double t1, double x1, double vol, double t, Stream& rng) {
  const double span = t1 - t0;
  if (span <= 0.0 || t >= t1) return x1;
  if (t <= t0) return x0;
  const double a = t - t0;
  const double mean = x0 + (a / span) * (x1 - x0);
  if (vol == 0.0) return mean;
  const double var = vol * vol * a * (t1 - t) / span;
  return mean + std::sqrt(var) * rng.normal();
}

/// Variance of an OU transition over dt.
double ou_variance(const OrnsteinUhlenbeck& ou, double dt) {
  if (ou.rate == 0.0) return ou.vol * ou.vol * dt;
  return ou.vol * ou.vol * (-std::expm1(-2.0 * ou.rate * dt)) / (2.0 * ou.rate);
}

}  // namespace

MotionModel::MotionModel(BaseMotion base, std::optional<JumpComponent> jumps)
    : base_(std::move(base)), jumps_(std::move(jumps)) {
  if (const auto* e = std::get_if<EulerDiffusion>(&base_)) {
    if (!e->drift || !e->vol) throw Error(ErrorCode::InvalidArgument, "diffusion needs drift and vol functions");
    if (!(e->step > 0.0)) throw Error(ErrorCode::InvalidArgument, "Euler step must be positive");
  }
  if (jumps_ && (!(jumps_->rate >= 0.0) || !jumps_->apply)) {
    throw Error(ErrorCode::InvalidArgument, "jump component needs a nonnegative rate and a map");
  }
}

MotionModel MotionModel::deterministic(std::function<double(double)> drift, double step) {
  return MotionModel(EulerDiffusion{std::move(drift), [](double) { return 0.0; }, step});
}

MotionModel MotionModel::diffusion(std::function<double(double)> drift, std::function<double(double)> vol,
                                   double step) {
  return MotionModel(EulerDiffusion{std::move(drift), std::move(vol), step});
}

MotionModel MotionModel::levy(const LevyParameters& params) {
  if (!(params.jump_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jump rate must be nonnegative");
  double total = 0.0;
  for (const auto& a : params.jumps) {
    if (!(a.prob >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jump probabilities must be nonnegative");
    total += a.prob;
  }
  if (params.jump_rate > 0.0 && !(total > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "positive jump rate needs a jump law");
  }
  // Small jumps are compensated: b_eff = b - rate * E[y 1{|y| < 1}].
  double small_mean = 0.0;
  std::vector<double> cdf;
  std::vector<double> sizes;
  double acc = 0.0;
  for (const auto& a : params.jumps) {
    if (std::abs(a.size) < 1.0) small_mean += a.size * a.prob / total;
    acc += a.prob / total;
    cdf.push_back(acc);
    sizes.push_back(a.size);
  }
  if (!cdf.empty()) cdf.back() = 1.0;

  std::optional<JumpComponent> jumps;
  if (params.jump_rate > 0.0) {
    jumps = JumpComponent{params.jump_rate,
                          [cdf, sizes](const State& s, Stream& rng) {
                            const auto it = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform());
                            const auto i = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                                                 sizes.size() - 1);
                            return State{s.x + sizes[i], s.type};
                          },
                          "levy_jump"};
  }
  MotionModel out(BrownianMotion{params.drift - params.jump_rate * small_mean, params.vol}, std::move(jumps));
  out.levy_ = params;
  return out;
}

MotionModel MotionModel::with_jumps(JumpComponent jumps) const {
  MotionModel out(base_, std::move(jumps));
  out.levy_ = levy_;
  return out;
}

bool MotionModel::is_still() const noexcept {
  if (has_jumps()) return false;
  const auto* b = std::get_if<BrownianMotion>(&base_);
  return b != nullptr && b->drift == 0.0 && b->vol == 0.0;
}

double MotionModel::drift_at(const State& s) const {
  return std::visit(Overloaded{
                        [](const BrownianMotion& b) { return b.drift; },
                        [&](const OrnsteinUhlenbeck& ou) { return -ou.rate * (s.x - ou.mean); },
                        [&](const TwoTypeBrownian& tt) { return tt.drift[type_index(s)]; },
                        [&](const EulerDiffusion& e) { return e.drift(s.x); },
                    },
                    base_);
}

double MotionModel::vol_at(const State& s) const {
  return std::visit(Overloaded{
                        [](const BrownianMotion& b) { return b.vol; },
                        [](const OrnsteinUhlenbeck& ou) { return ou.vol; },
                        [&](const TwoTypeBrownian& tt) { return tt.vol[type_index(s)]; },
                        [&](const EulerDiffusion& e) { return e.vol(s.x); },
                    },
                    base_);
}

State MotionModel::evolve_base(const State& x, double dt, Stream& rng, TracePiece* piece) const {
  State out = std::visit(
      Overloaded{
          [&](const BrownianMotion& b) {
            double y = x.x + b.drift * dt;
            if (b.vol != 0.0) y += b.vol * std::sqrt(dt) * rng.normal();
            return State{y, x.type};
          },
          [&](const OrnsteinUhlenbeck& ou) {
            const double mean = ou.mean + (x.x - ou.mean) * std::exp(-ou.rate * dt);
            const double var = ou_variance(ou, dt);
            return State{var > 0.0 ? mean + std::sqrt(var) * rng.normal() : mean, x.type};
          },
          [&](const TwoTypeBrownian& tt) {
            const int i = type_index(x);
            double y = x.x + tt.drift[i] * dt;
            if (tt.vol[i] != 0.0) y += tt.vol[i] * std::sqrt(dt) * rng.normal();
            return State{y, x.type};
          },
          [&](const EulerDiffusion& e) {
            double y = x.x;
            double t = 0.0;
            if (piece) piece->steps.push_back({piece->t0, x});
            while (t < dt) {
              const double h = std::min(e.step, dt - t);
              const double vol = e.vol(y);
              y += e.drift(y) * h;
              if (vol != 0.0) y += vol * std::sqrt(h) * rng.normal();
              if (!std::isfinite(y)) break;
              t = (dt - t <= e.step) ? dt : t + h;
              if (piece) piece->steps.push_back({piece->t0 + t, State{y, x.type}});
            }
            return State{y, x.type};
          },
      },
      base_);
  check_finite(out);
  return out;
}

State MotionModel::evolve_traced(const State& x, double dt, Stream& rng, Trace* trace) const {
  if (!(dt >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be nonnegative");
  check_finite(x);
  State cur = x;
  double t = 0.0;
  auto run_base = [&](double span) {
    TracePiece* piece = nullptr;
    if (trace) {
      trace->push_back(TracePiece{t, t + span, cur, cur, {}});
      piece = &trace->back();
    }
    cur = evolve_base(cur, span, rng, piece);
    if (piece) piece->end = cur;
  };
  if (!has_jumps()) {
    run_base(dt);
    return cur;
  }
  for (;;) {
    const double wait = rng.exponential(jumps_->rate);
    if (t + wait >= dt) {
      run_base(dt - t);
      return cur;
    }
    run_base(wait);
    t += wait;
    cur = jumps_->apply(cur, rng);
    check_finite(cur);
  }
}

State MotionModel::evolve(const State& x, double dt, Stream& rng) const {
  return evolve_traced(x, dt, rng, nullptr);
}

State MotionModel::bridge_base(const TracePiece& piece, double t_prev, const State& x_prev, double t,
                               Stream& rng) const {
  if (t >= piece.t1) return piece.end;
  if (t <= t_prev) return x_prev;
  const double y = std::visit(
      Overloaded{
          [&](const BrownianMotion& b) {
            return brownian_bridge(t_prev, x_prev.x, piece.t1, piece.end.x, b.vol, t, rng);
          },
          [&](const TwoTypeBrownian& tt) {
            return brownian_bridge(t_prev, x_prev.x, piece.t1, piece.end.x, tt.vol[type_index(x_prev)], t, rng);
          },
          [&](const OrnsteinUhlenbeck& ou) {
            // Prior X_t | X_prev, then condition on X_end = a + k X_t + noise.
            const double a_span = t - t_prev;
            const double b_span = piece.t1 - t;
            const double prior_mean = ou.mean + (x_prev.x - ou.mean) * std::exp(-ou.rate * a_span);
            const double va = ou_variance(ou, a_span);
            const double vb = ou_variance(ou, b_span);
            const double k = std::exp(-ou.rate * b_span);
            if (va <= 0.0) return prior_mean;
            if (vb <= 0.0) return (piece.end.x - ou.mean * (1.0 - k)) / k;
            const double precision = 1.0 / va + k * k / vb;
            const double mean = (prior_mean / va + k * (piece.end.x - ou.mean * (1.0 - k)) / vb) / precision;
            return mean + std::sqrt(1.0 / precision) * rng.normal();
          },
          [&](const EulerDiffusion& e) {
            // Euler interpolant inside the step, Brownian bridge for its noise.
            const auto& steps = piece.steps;
            auto it = std::upper_bound(steps.begin(), steps.end(), t,
                                       [](double v, const PathPoint& p) { return v < p.t; });
            if (it == steps.end()) return piece.end.x;
            const PathPoint& right = *it;
            const PathPoint& left = *(it - 1);
            const double drift = e.drift(left.state.x);
            const double vol = e.vol(left.state.x);
            auto noise = [&](double s, double xs) { return xs - left.state.x - drift * (s - left.t); };
            const double n_end = noise(right.t, right.state.x);
            const bool same_step = t_prev >= left.t;
            const double s0 = same_step ? t_prev : left.t;
            const double n0 = same_step ? noise(t_prev, x_prev.x) : 0.0;
            const double n = brownian_bridge(s0, n0, right.t, n_end, vol, t, rng);
            return left.state.x + drift * (t - left.t) + n;
          },
      },
      base_);
  return State{y, piece.start.type};
}

void MotionModel::fill_from_trace(const Trace& trace, std::span<const double> times, Stream& rng,
                                  std::vector<PathPoint>& out) const {
  if (trace.empty()) return;
  std::size_t i = 0;
  double t_prev = trace[0].t0;
  State x_prev = trace[0].start;
  for (double t : times) {
    while (i + 1 < trace.size() && t >= trace[i].t1) {
      ++i;
      t_prev = trace[i].t0;
      x_prev = trace[i].start;
    }
    const State s = bridge_base(trace[i], t_prev, x_prev, t, rng);
    out.push_back({t, s});
    t_prev = t;
    x_prev = s;
  }
}

std::vector<PathPoint> MotionModel::evolve_path(const State& x, double dt, double grid, Stream& rng) const {
  if (!(grid > 0.0)) throw Error(ErrorCode::InvalidArgument, "path grid must be positive");
  Trace trace;
  const State end = evolve_traced(x, dt, rng, &trace);
  Stream bridge(rng());
  std::vector<double> interior;
  for (std::size_t k = 1; static_cast<double>(k) * grid < dt; ++k) interior.push_back(static_cast<double>(k) * grid);
  std::vector<PathPoint> path;
  path.reserve(interior.size() + 2);
  path.push_back({0.0, x});
  fill_from_trace(trace, interior, bridge, path);
  if (dt > 0.0) path.push_back({dt, end});
  return path;
}

}  // namespace gwspine
