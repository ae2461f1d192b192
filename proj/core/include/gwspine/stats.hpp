#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gwspine {

/// Monte Carlo estimate: the unit of all verification output.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;  ///< standard error of `mean`
  std::size_t n = 0;

  static McEstimate exact(double value) { return {value, 0.0, 0}; }
};

/// Pairwise (cascade) summation in index order. Result depends only on the
/// order of `values`, never on how they were produced.
double pairwise_sum(std::span<const double> values);

/// Sample mean and standard error, both reduced with pairwise_sum. A constant
/// sample returns that value with se = 0.
McEstimate estimate(std::span<const double> values);

/// Ratio estimator sum(num)/sum(den) with the delta-method standard error,
/// treating (num_i, den_i) as i.i.d. clusters.
McEstimate ratio_estimate(std::span<const double> num, std::span<const double> den);

struct ZTest {
  double z = 0.0;
  bool pass = true;
};

/// z = |mu1 - mu2| / sqrt(se1^2 + se2^2); z = inf when both se are zero and
/// the means differ beyond rounding (relative 1e-12).
ZTest two_sample_z(const McEstimate& lhs, const McEstimate& rhs, double z_max = 4.0);

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);
double normal_quantile(double p);

/// Kolmogorov-Smirnov distance between an empirical sample and a CDF.
/// `sample` is sorted in place.
double ks_distance(std::vector<double>& sample, const std::function<double(double)>& cdf);
/// Two-sample KS distance. Both inputs must be sorted.
double ks_distance_sorted(std::span<const double> a, std::span<const double> b);
/// Asymptotic Kolmogorov p-value for statistic d on effective size n.
double ks_pvalue(double d, double n_eff);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square of observed counts vs expected counts. Adjacent bins are
/// merged from the right until every expected count is >= min_expected.
ChiSquareResult chi_square(std::span<const double> observed, std::span<const double> expected,
                           double min_expected = 5.0, int fitted_params = 0);

/// Gauss-Legendre rule mapped to [a, b].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_legendre(int n, double a = 0.0, double b = 1.0);

/// Composite trapezoid on a uniform grid with spacing h.
double trapezoid(std::span<const double> values, double h);

/// Batch-means estimate of the mean of a correlated series.
McEstimate batch_means(std::span<const double> series, int batches);

/// Empirical quantile (type 7) of a sorted sample.
double quantile_sorted(std::span<const double> sorted, double p);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> mass;  ///< normalized to sum 1
};
Histogram histogram(std::span<const double> values, int bins, double lo, double hi);

}  // namespace gwspine
