#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "gwspine/rng.hpp"

namespace gwspine {

struct OffspringAtom {
  int k = 0;
  double p = 0.0;
};

/// Finite-support offspring law with p_1 = 0.
///
/// Immutable after construction. Holds three cumulative tables: the plain law
/// p_k, the size-biased law k p_k / m, and the pair-biased law
/// k (k - 1) p_k / sum_h h (h - 1) p_h used by the fork estimators.
class OffspringDistribution {
 public:
  /// Normalizes raw weights and checks the standing hypotheses.
  /// Throws EmptySupport, NegativeWeight or PositiveP1.
  static OffspringDistribution validate(std::span<const std::pair<int, double>> raw);
  static OffspringDistribution validate(const std::map<int, double>& raw);

  /// Binary splitting, p_2 = 1.
  static OffspringDistribution yule();

  int sample(Stream& rng) const;
  /// Throws ZeroMean when m = 0.
  int sample_size_biased(Stream& rng) const;
  /// Draws h with probability h (h - 1) p_h / sum. Throws DegeneratePairs
  /// when no k >= 2 carries mass.
  int sample_pair_biased(Stream& rng) const;

  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }
  /// sum_k k (k - 1) p_k
  double factorial_moment2() const noexcept { return factorial2_; }
  double second_moment() const noexcept { return variance_ + mean_ * mean_; }
  double prob(int k) const noexcept;
  int max_k() const noexcept { return atoms_.empty() ? 0 : atoms_.back().k; }
  bool has_pairs() const noexcept { return factorial2_ > 0.0; }
  std::span<const OffspringAtom> support() const noexcept { return atoms_; }

 private:
  OffspringDistribution() = default;

  static int draw(const std::vector<double>& cumulative, const std::vector<OffspringAtom>& atoms,
                  Stream& rng);

  std::vector<OffspringAtom> atoms_;
  std::vector<double> cdf_;
  std::vector<double> sb_cdf_;
  std::vector<double> pair_cdf_;
  double mean_ = 0.0;
  double variance_ = 0.0;
  double factorial2_ = 0.0;
};

}  // namespace gwspine
