#include "gwspine/auxiliary.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "gwspine/parallel.hpp"

namespace gwspine {

namespace {

constexpr int kQuadraturePoints = 64;

const Quadrature& unit_rule() {
  static const Quadrature rule = gauss_legendre(kQuadraturePoints, 0.0, 1.0);
  return rule;
}

/// Integrates h(u) over u in [0, 1] for the kernel's randomness: a single
/// evaluation for theta-free kernels, Gauss-Legendre otherwise.
template <class H>
double integrate_theta(const BranchingKernel& kernel, H&& h) {
  if (kernel.theta_free()) return h(0.5);
  const Quadrature& q = unit_rule();
  double acc = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) acc += q.weights[i] * h(q.nodes[i]);
  return acc;
}

bool exact_possible(const BranchingKernel& kernel) { return kernel.theta_free() || kernel.has_uniform_form(); }

}  // namespace

Spine::Spine(const BranchingModel& model) : model_(&model), jump_rate_(model.rate * model.offspring.mean()) {
  if (!(model.offspring.mean() > 0.0)) throw Error(ErrorCode::ZeroMean, "the spine needs m > 0");
}

SpineState Spine::start(Stream& rng) const {
  Stream init(derive_key(rng(), stream_tag::initial));
  return SpineState{0.0, model_->initial.draw(init)};
}

SpineJump Spine::jump(SpineState& s, Stream& rng) const {
  SpineJump j;
  j.time = s.t;
  j.offspring = model_->offspring.sample_size_biased(rng);
  j.child = static_cast<int>(rng.below(static_cast<std::uint64_t>(j.offspring))) + 1;
  j.theta = rng();
  const auto children = model_->kernel.positions(s.state, j.offspring, j.theta);
  s.state = children[static_cast<std::size_t>(j.child - 1)];
  s.mark += std::log(static_cast<double>(j.offspring));
  s.generation += 1;
  s.last_jump = s.t;
  return j;
}

void Spine::advance_to(SpineState& s, double t, Stream& rng, std::vector<SpineJump>* jumps) const {
  if (t < s.t) throw Error(ErrorCode::InvalidArgument, "spine cannot run backwards");
  const MotionModel& motion = model_->motion;
  const bool still = motion.is_still();
  for (;;) {
    const double wait = rng.exponential(jump_rate_);
    if (s.t + wait >= t) {
      if (!still) s.state = motion.evolve(s.state, t - s.t, rng);
      s.t = t;
      return;
    }
    if (!still) s.state = motion.evolve(s.state, wait, rng);
    s.t += wait;
    const SpineJump j = jump(s, rng);
    if (jumps) jumps->push_back(j);
  }
}

std::pair<SpineState, SpineState> Spine::fork(const SpineState& s, Stream& rng) const {
  const int h = model_->offspring.sample_pair_biased(rng);
  const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(h)));
  auto k = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(h - 1)));
  if (k >= i) ++k;
  const auto children = model_->kernel.positions(s.state, h, rng());
  SpineState a = s;
  a.state = children[i];
  a.mark += std::log(static_cast<double>(h));
  a.generation += 1;
  a.last_jump = s.t;
  SpineState b = a;
  b.state = children[k];
  return {a, b};
}

AuxiliaryPath simulate_auxiliary(const BranchingModel& model, double horizon, std::span<const double> times,
                                 Stream& rng) {
  const Spine spine(model);
  SpineState s = spine.start(rng);
  AuxiliaryPath out;
  for (double t : times) {
    if (t < s.t || t > horizon) throw Error(ErrorCode::InvalidArgument, "observation times must ascend within [0, horizon]");
    spine.advance_to(s, t, rng, &out.jumps);
    out.observed.push_back(s.view());
  }
  spine.advance_to(s, horizon, rng, &out.jumps);
  out.terminal = s.view();
  return out;
}

McEstimate estimate_semigroup(const BranchingModel& model, const StateFn& f, double t, std::optional<State> x,
                              std::size_t n_reps, std::uint64_t seed, unsigned jobs) {
  if (n_reps < 2) throw Error(ErrorCode::InvalidArgument, "estimate_semigroup needs at least 2 replicas");
  const Spine spine(model);
  const auto values = run_replicas<double>(n_reps, jobs, [&](std::size_t i) {
    Stream rng(derive_key(seed, i));
    SpineState s = x ? spine.start_at(*x) : spine.start(rng);
    spine.advance_to(s, t, rng);
    return f(s.state);
  });
  McEstimate est = estimate(values);
  if (est.se < 1e-300) est.se = 0.0;
  return est;
}

McEstimate apply_j1(const BranchingModel& model, const StateFn& f, const State& x, OperatorMode mode,
                    std::size_t n_reps, Stream& rng) {
  const auto& d = model.offspring;
  const auto& kernel = model.kernel;
  if (mode == OperatorMode::Exact && exact_possible(kernel)) {
    double total = 0.0;
    for (const auto& atom : d.support()) {
      if (atom.k == 0) continue;
      total += atom.p * integrate_theta(kernel, [&](double u) {
        double acc = 0.0;
        for (const State& c : kernel.positions_at_uniform(x, atom.k, u)) acc += f(c);
        return acc;
      });
    }
    return McEstimate::exact(total);
  }
  if (n_reps < 2) throw Error(ErrorCode::InvalidArgument, "Monte Carlo J1 needs at least 2 draws");
  std::vector<double> values(n_reps);
  const double m = d.mean();
  for (auto& v : values) {
    const int h = d.sample_size_biased(rng);
    const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(h)));
    v = m * f(kernel.positions(x, h, rng())[i]);
  }
  return estimate(values);
}

McEstimate apply_j2(const BranchingModel& model, const StateFn& f, const StateFn& g, const State& x,
                    OperatorMode mode, std::size_t n_reps, Stream& rng) {
  const auto& d = model.offspring;
  const auto& kernel = model.kernel;
  if (!d.has_pairs()) return McEstimate::exact(0.0);
  if (mode == OperatorMode::Exact && exact_possible(kernel)) {
    double total = 0.0;
    for (const auto& atom : d.support()) {
      if (atom.k < 2) continue;
      total += atom.p * integrate_theta(kernel, [&](double u) {
        const auto children = kernel.positions_at_uniform(x, atom.k, u);
        double sf = 0.0;
        double sg = 0.0;
        double sfg = 0.0;
        for (const State& c : children) {
          const double a = f(c);
          const double b = g(c);
          sf += a;
          sg += b;
          sfg += a * b;
        }
        return sf * sg - sfg;
      });
    }
    return McEstimate::exact(total);
  }
  if (n_reps < 2) throw Error(ErrorCode::InvalidArgument, "Monte Carlo J2 needs at least 2 draws");
  std::vector<double> values(n_reps);
  const double scale = d.factorial_moment2();
  for (auto& v : values) {
    const int h = d.sample_pair_biased(rng);
    const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(h)));
    auto k = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(h - 1)));
    if (k >= i) ++k;
    const auto children = kernel.positions(x, h, rng());
    v = scale * f(children[i]) * g(children[k]);
  }
  return estimate(values);
}

double StationaryEstimate::cdf(double x) const {
  if (sorted.empty()) return 0.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

McEstimate StationaryEstimate::mean_of(const StateFn& f, int batches) const {
  std::vector<double> series(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) series[i] = f(states[i]);
  return batch_means(series, batches);
}

StationaryEstimate estimate_stationary(const BranchingModel& model, const StationaryOptions& opts, Stream& rng) {
  if (!(opts.run_length > 0.0) || !(opts.spacing > 0.0) || opts.batches < 2) {
    throw Error(ErrorCode::InvalidArgument, "stationary run needs positive length and spacing, and >= 2 batches");
  }
  const double burn_in = opts.burn_in < 0.0 ? 0.1 * opts.run_length : opts.burn_in;
  const Spine spine(model);
  SpineState s = spine.start(rng);
  auto guard = [&] {
    if (!(std::abs(s.state.x) <= opts.divergence_bound)) {
      throw Error(ErrorCode::DivergenceDetected,
                  "spine left [-" + std::to_string(opts.divergence_bound) + ", " +
                      std::to_string(opts.divergence_bound) + "] at t=" + std::to_string(s.t));
    }
  };
  // Advance in spacing-sized chunks during burn-in too, so divergence is caught early.
  for (double t = std::min(opts.spacing, burn_in); s.t < burn_in; t = std::min(t + opts.spacing, burn_in)) {
    spine.advance_to(s, t, rng);
    guard();
  }
  const auto n = static_cast<std::size_t>(std::floor(opts.run_length / opts.spacing));
  StationaryEstimate out;
  out.states.reserve(n);
  out.samples.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    spine.advance_to(s, burn_in + static_cast<double>(k) * opts.spacing, rng);
    guard();
    out.states.push_back(s.state);
    out.samples.push_back(s.state.x);
  }
  out.sorted = out.samples;
  std::sort(out.sorted.begin(), out.sorted.end());
  for (int p = 1; p <= 4; ++p) {
    out.moments[static_cast<std::size_t>(p - 1)] =
        out.mean_of([p](const State& x) { return std::pow(x.x, p); }, opts.batches);
  }
  return out;
}

void write_stationary_csv(std::ostream& os, const StationaryEstimate& est, int bins) {
  if (est.sorted.empty()) return;
  const double lo = est.sorted.front();
  double hi = est.sorted.back();
  if (hi <= lo) hi = lo + 1.0;
  const Histogram h = histogram(est.samples, bins, lo, hi);
  const double width = (hi - lo) / bins;
  std::ostringstream out;
  out.precision(17);
  out << "bin_left,bin_right,mass\n";
  for (int b = 0; b < bins; ++b) {
    out << lo + b * width << ',' << lo + (b + 1) * width << ',' << h.mass[static_cast<std::size_t>(b)] << '\n';
  }
  for (std::size_t p = 0; p < est.moments.size(); ++p) out << "moment," << p + 1 << ',' << est.moments[p].mean << '\n';
  os << out.str();
}

}  // namespace gwspine
