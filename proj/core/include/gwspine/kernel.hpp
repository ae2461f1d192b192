#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gwspine/motion.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/rng.hpp"

namespace gwspine {

/// Parameters of the two-type cell aging model. Single-child maps use
/// (alpha, beta) with correlated noise (sigma, rho); two-child maps use the
/// primed parameters with independent noises of scale sigma0, sigma1.
struct AgingParameters {
  double p0 = 0.1;
  double p1 = 0.1;
  double p01 = 0.75;
  double alpha0 = 0.5, alpha1 = 0.5;
  double beta0 = 0.5, beta1 = 0.5;
  double alpha0_split = 0.6, alpha1_split = 0.4;
  double beta0_split = 1.0, beta1_split = 0.9;
  double sigma = 0.1;
  double rho = 0.3;
  double sigma0 = 0.1, sigma1 = 0.1;
};

/// Offspring positions F_j^(k)(x, theta).
///
/// theta is 64 bits of seed material; kernels needing several uniforms expand
/// it through a Stream, so a kernel is a pure function of (x, k, theta).
/// Kernels whose randomness is a single uniform also expose that form, which
/// lets J1/J2 be computed by quadrature.
class BranchingKernel {
 public:
  using PositionFn = std::function<std::vector<State>(const State&, int, std::uint64_t)>;
  using UniformFn = std::function<std::vector<State>(const State&, int, double)>;

  BranchingKernel() : BranchingKernel(local()) {}
  BranchingKernel(std::string name, PositionFn positions, std::optional<std::set<int>> arities,
                  UniformFn by_uniform = {}, bool theta_free = false);

  /// Every child at x / k.
  static BranchingKernel equal_split();
  /// k = 2 only: children at (q x, (1 - q) x), q uniform.
  static BranchingKernel uniform_fraction();
  /// k = 2 only: q ~ Beta(a, b) by inversion of the single uniform.
  static BranchingKernel beta_fraction(double a, double b);
  /// Child j at x + deltas[j-1]; arity is deltas.size().
  static BranchingKernel additive(std::vector<double> deltas);
  /// Every child at x.
  static BranchingKernel local();
  /// Two-child division of the aging model: (g0', type 0) and (g1', type 1).
  static BranchingKernel aging(const AgingParameters& params);

  std::vector<State> positions(const State& x, int k, std::uint64_t theta) const;
  /// Draws theta from `rng` and applies positions. k = 0 gives an empty list.
  std::vector<State> branch(const State& x, int k, Stream& rng) const;

  bool has_uniform_form() const noexcept { return static_cast<bool>(by_uniform_); }
  bool theta_free() const noexcept { return theta_free_; }
  std::vector<State> positions_at_uniform(const State& x, int k, double u) const;

  bool supports(int k) const;
  /// Throws KernelArityMismatch unless every k >= 1 in the support is handled.
  void check_arity(const OffspringDistribution& d) const;
  const std::string& name() const noexcept { return name_; }

 private:
  void require(int k) const;

  std::string name_;
  PositionFn positions_;
  std::optional<std::set<int>> arities_;
  UniformFn by_uniform_;
  bool theta_free_ = false;
};

/// Single-child replacement of the aging model as a motion jump: maps
/// (zeta, type) to (g0(zeta), 0) w.p. p0 / (p0 + p1), else (g1(zeta), 1).
JumpComponent aging_replacement_jump(const AgingParameters& params, double rate);

}  // namespace gwspine
