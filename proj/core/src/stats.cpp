#include "gwspine/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include "gwspine/error.hpp"

namespace gwspine {

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

McEstimate estimate(std::span<const double> values) {
  McEstimate out;
  out.n = values.size();
  if (values.empty()) return out;
  // A constant sample is an exact value, not an estimate with rounding noise.
  if (std::all_of(values.begin(), values.end(), [v0 = values[0]](double v) { return v == v0; })) {
    out.mean = values[0];
    return out;
  }
  out.mean = pairwise_sum(values) / static_cast<double>(out.n);
  std::vector<double> sq(values.size());
  std::transform(values.begin(), values.end(), sq.begin(), [m = out.mean](double v) {
    const double d = v - m;
    return d * d;
  });
  const double var = pairwise_sum(sq) / static_cast<double>(out.n - 1);
  out.se = std::sqrt(var / static_cast<double>(out.n));
  return out;
}

McEstimate ratio_estimate(std::span<const double> num, std::span<const double> den) {
  if (num.size() != den.size()) throw Error(ErrorCode::InvalidArgument, "ratio_estimate size mismatch");
  McEstimate out;
  out.n = num.size();
  const double sn = pairwise_sum(num);
  const double sd = pairwise_sum(den);
  if (sd == 0.0) return out;
  out.mean = sn / sd;
  if (out.n < 2) return out;
  std::vector<double> resid(num.size());
  for (std::size_t i = 0; i < num.size(); ++i) {
    const double e = num[i] - out.mean * den[i];
    resid[i] = e * e;
  }
  const double n = static_cast<double>(out.n);
  out.se = std::sqrt(pairwise_sum(resid) * n / (n - 1.0)) / sd;
  return out;
}

ZTest two_sample_z(const McEstimate& lhs, const McEstimate& rhs, double z_max) {
  const double diff = std::abs(lhs.mean - rhs.mean);
  const double se = std::sqrt(lhs.se * lhs.se + rhs.se * rhs.se);
  ZTest out;
  if (se == 0.0) {
    // Two exact values agree if they differ only by rounding.
    const double scale = std::max({1.0, std::abs(lhs.mean), std::abs(rhs.mean)});
    out.z = diff <= 1e-12 * scale ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    out.z = diff / se;
  }
  out.pass = out.z <= z_max;
  return out;
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double ks_distance(std::vector<double>& sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_distance_sorted(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return 1.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_pvalue(double d, double n_eff) {
  const double lambda = (std::sqrt(n_eff) + 0.12 + 0.11 / std::sqrt(n_eff)) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

ChiSquareResult chi_square(std::span<const double> observed, std::span<const double> expected,
                           double min_expected, int fitted_params) {
  if (observed.size() != expected.size() || observed.empty()) {
    throw Error(ErrorCode::InvalidArgument, "chi_square needs matching non-empty bins");
  }
  std::vector<double> obs, exp;
  double o_acc = 0.0, e_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected[i];
    if (e_acc >= min_expected) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp.empty()) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
    } else {
      obs.back() += o_acc;
      exp.back() += e_acc;
    }
  }
  ChiSquareResult out;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double d = obs[i] - exp[i];
    out.statistic += d * d / exp[i];
  }
  out.dof = static_cast<int>(obs.size()) - 1 - fitted_params;
  if (out.dof <= 0) {
    out.p_value = 1.0;
    return out;
  }
  out.p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared_distribution<double>(out.dof), out.statistic));
  return out;
}

Quadrature gauss_legendre(int n, double a, double b) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "gauss_legendre needs n >= 1");
  // legendre_p_zeros returns the non-negative roots in ascending order.
  const auto positive = boost::math::legendre_p_zeros<double>(n);
  std::vector<double> roots;
  for (auto it = positive.rbegin(); it != positive.rend(); ++it) {
    if (*it != 0.0) roots.push_back(-*it);
  }
  for (double r : positive) roots.push_back(r);
  Quadrature q;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (double x : roots) {
    const double dp = boost::math::legendre_p_prime(n, x);
    q.nodes.push_back(mid + half * x);
    q.weights.push_back(half * 2.0 / ((1.0 - x * x) * dp * dp));
  }
  return q;
}

double trapezoid(std::span<const double> values, double h) {
  if (values.size() < 2) return 0.0;
  std::vector<double> w(values.begin(), values.end());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return h * pairwise_sum(w);
}

McEstimate batch_means(std::span<const double> series, int batches) {
  if (batches < 2 || series.size() < static_cast<std::size_t>(batches)) {
    throw Error(ErrorCode::InvalidArgument, "batch_means needs at least 2 batches of data");
  }
  const std::size_t len = series.size() / static_cast<std::size_t>(batches);
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    means.push_back(pairwise_sum(series.subspan(static_cast<std::size_t>(b) * len, len)) /
                    static_cast<double>(len));
  }
  McEstimate est = estimate(means);
  est.mean = pairwise_sum(series.first(len * static_cast<std::size_t>(batches))) /
             static_cast<double>(len * static_cast<std::size_t>(batches));
  est.n = series.size();
  return est;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Histogram histogram(std::span<const double> values, int bins, double lo, double hi) {
  Histogram h{lo, hi, std::vector<double>(static_cast<std::size_t>(bins), 0.0)};
  if (values.empty() || bins <= 0) return h;
  const double width = (hi - lo) / bins;
  for (double v : values) {
    auto k = width > 0.0 ? static_cast<long>(std::floor((v - lo) / width)) : 0L;
    k = std::clamp(k, 0L, static_cast<long>(bins) - 1);
    h.mass[static_cast<std::size_t>(k)] += 1.0;
  }
  for (double& m : h.mass) m /= static_cast<double>(values.size());
  return h;
}

}  // namespace gwspine
