#include "gwspine/kernel.hpp"

#include <cmath>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "gwspine/error.hpp"

namespace gwspine {

namespace {

double theta_uniform(std::uint64_t theta) { return Stream(theta).uniform(); }

std::vector<State> split_at(const State& x, double q) {
  return {State{q * x.x, x.type}, State{(1.0 - q) * x.x, x.type}};
}

}  // namespace

BranchingKernel::BranchingKernel(std::string name, PositionFn positions, std::optional<std::set<int>> arities,
                                 UniformFn by_uniform, bool theta_free)
    : name_(std::move(name)),
      positions_(std::move(positions)),
      arities_(std::move(arities)),
      by_uniform_(std::move(by_uniform)),
      theta_free_(theta_free) {
  if (!positions_) throw Error(ErrorCode::InvalidArgument, "kernel needs a position map");
}

BranchingKernel BranchingKernel::equal_split() {
  auto fn = [](const State& x, int k, double) {
    return std::vector<State>(static_cast<std::size_t>(k), State{x.x / k, x.type});
  };
  return BranchingKernel(
      "equal_split", [fn](const State& x, int k, std::uint64_t) { return fn(x, k, 0.5); }, std::nullopt, fn, true);
}

BranchingKernel BranchingKernel::uniform_fraction() {
  auto fn = [](const State& x, int, double u) { return split_at(x, u); };
  return BranchingKernel(
      "uniform_fraction", [fn](const State& x, int k, std::uint64_t theta) { return fn(x, k, theta_uniform(theta)); },
      std::set<int>{2}, fn);
}

BranchingKernel BranchingKernel::beta_fraction(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta_fraction needs a, b > 0");
  auto fn = [a, b](const State& x, int, double u) { return split_at(x, boost::math::ibeta_inv(a, b, u)); };
  return BranchingKernel(
      "beta_fraction", [fn](const State& x, int k, std::uint64_t theta) { return fn(x, k, theta_uniform(theta)); },
      std::set<int>{2}, fn);
}

BranchingKernel BranchingKernel::additive(std::vector<double> deltas) {
  if (deltas.empty()) throw Error(ErrorCode::InvalidArgument, "additive kernel needs displacements");
  const int arity = static_cast<int>(deltas.size());
  auto fn = [deltas](const State& x, int k, double) {
    std::vector<State> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) out.push_back(State{x.x + deltas[static_cast<std::size_t>(j)], x.type});
    return out;
  };
  return BranchingKernel(
      "additive", [fn](const State& x, int k, std::uint64_t) { return fn(x, k, 0.5); }, std::set<int>{arity}, fn,
      true);
}

BranchingKernel BranchingKernel::local() {
  auto fn = [](const State& x, int k, double) { return std::vector<State>(static_cast<std::size_t>(k), x); };
  return BranchingKernel(
      "local", [fn](const State& x, int k, std::uint64_t) { return fn(x, k, 0.5); }, std::nullopt, fn, true);
}

BranchingKernel BranchingKernel::aging(const AgingParameters& p) {
  return BranchingKernel(
      "aging",
      [p](const State& x, int, std::uint64_t theta) {
        Stream s(theta);
        const double e0 = p.sigma0 * s.normal();
        const double e1 = p.sigma1 * s.normal();
        return std::vector<State>{State{p.alpha0_split * x.x + p.beta0_split + e0, 0},
                                  State{p.alpha1_split * x.x + p.beta1_split + e1, 1}};
      },
      std::set<int>{2});
}

bool BranchingKernel::supports(int k) const {
  return k == 0 || !arities_ || arities_->count(k) > 0;
}

void BranchingKernel::require(int k) const {
  if (k < 0 || !supports(k)) {
    throw Error(ErrorCode::KernelArityMismatch,
                "kernel '" + name_ + "' does not handle " + std::to_string(k) + " children");
  }
}

void BranchingKernel::check_arity(const OffspringDistribution& d) const {
  for (const auto& a : d.support()) require(a.k);
}

std::vector<State> BranchingKernel::positions(const State& x, int k, std::uint64_t theta) const {
  require(k);
  if (k == 0) return {};
  auto out = positions_(x, k, theta);
  if (static_cast<int>(out.size()) != k) {
    throw Error(ErrorCode::KernelArityMismatch, "kernel '" + name_ + "' returned the wrong number of children");
  }
  return out;
}

std::vector<State> BranchingKernel::branch(const State& x, int k, Stream& rng) const {
  return positions(x, k, rng());
}

std::vector<State> BranchingKernel::positions_at_uniform(const State& x, int k, double u) const {
  require(k);
  if (!by_uniform_) throw Error(ErrorCode::InvalidArgument, "kernel '" + name_ + "' has no single-uniform form");
  if (k == 0) return {};
  return by_uniform_(x, k, u);
}

JumpComponent aging_replacement_jump(const AgingParameters& p, double rate) {
  const double total = p.p0 + p.p1;
  const double to_type0 = total > 0.0 ? p.p0 / total : 1.0;
  const double mix = std::sqrt(1.0 - p.rho * p.rho);
  return JumpComponent{rate,
                       [p, to_type0, mix](const State& x, Stream& rng) {
                         const double pick = rng.uniform();
                         const double z0 = rng.normal();
                         const double z1 = rng.normal();
                         const double e0 = p.sigma * z0;
                         const double e1 = p.sigma * (p.rho * z0 + mix * z1);
                         if (pick <= to_type0) return State{p.alpha0 * x.x + p.beta0 + e0, 0};
                         return State{p.alpha1 * x.x + p.beta1 + e1, 1};
                       },
                       "aging_replacement"};
}

}  // namespace gwspine
