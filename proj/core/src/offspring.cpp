#include "gwspine/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwspine/error.hpp"

namespace gwspine {

namespace {

std::vector<double> cumulative(const std::vector<OffspringAtom>& atoms, auto weight) {
  std::vector<double> cdf;
  double total = 0.0;
  for (const auto& a : atoms) total += weight(a);
  double acc = 0.0;
  for (const auto& a : atoms) {
    acc += weight(a) / total;
    cdf.push_back(acc);
  }
  if (!cdf.empty()) cdf.back() = 1.0;
  return cdf;
}

}  // namespace

OffspringDistribution OffspringDistribution::validate(std::span<const std::pair<int, double>> raw) {
  std::map<int, double> merged;
  for (const auto& [k, w] : raw) {
    if (k < 0) throw Error(ErrorCode::InvalidArgument, "negative offspring count " + std::to_string(k));
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::NegativeWeight, "weight for k=" + std::to_string(k) + " is not a finite nonnegative number");
    }
    merged[k] += w;
  }
  return validate(merged);
}

OffspringDistribution OffspringDistribution::validate(const std::map<int, double>& raw) {
  double total = 0.0;
  for (const auto& [k, w] : raw) {
    if (k < 0) throw Error(ErrorCode::InvalidArgument, "negative offspring count " + std::to_string(k));
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::NegativeWeight, "weight for k=" + std::to_string(k) + " is not a finite nonnegative number");
    }
    total += w;
  }
  if (raw.empty() || total <= 0.0) throw Error(ErrorCode::EmptySupport, "offspring weights are all zero");
  if (auto it = raw.find(1); it != raw.end() && it->second > 0.0) {
    throw Error(ErrorCode::PositiveP1,
                "p_1 > 0; absorb single-child events into the motion and lower the branching rate");
  }

  OffspringDistribution d;
  for (const auto& [k, w] : raw) {
    if (w > 0.0) d.atoms_.push_back({k, w / total});
  }
  for (const auto& a : d.atoms_) d.mean_ += a.k * a.p;
  for (const auto& a : d.atoms_) {
    d.variance_ += (a.k - d.mean_) * (a.k - d.mean_) * a.p;
    d.factorial2_ += static_cast<double>(a.k) * (a.k - 1) * a.p;
  }
  d.cdf_ = cumulative(d.atoms_, [](const OffspringAtom& a) { return a.p; });
  if (d.mean_ > 0.0) d.sb_cdf_ = cumulative(d.atoms_, [](const OffspringAtom& a) { return a.k * a.p; });
  if (d.factorial2_ > 0.0) {
    d.pair_cdf_ = cumulative(d.atoms_, [](const OffspringAtom& a) { return a.k * (a.k - 1.0) * a.p; });
  }
  return d;
}

OffspringDistribution OffspringDistribution::yule() {
  return validate(std::map<int, double>{{2, 1.0}});
}

int OffspringDistribution::draw(const std::vector<double>& cdf, const std::vector<OffspringAtom>& atoms,
                                Stream& rng) {
  if (atoms.size() == 1) return atoms.front().k;
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), atoms.size() - 1);
  return atoms[idx].k;
}

int OffspringDistribution::sample(Stream& rng) const { return draw(cdf_, atoms_, rng); }

int OffspringDistribution::sample_size_biased(Stream& rng) const {
  if (mean_ <= 0.0) throw Error(ErrorCode::ZeroMean, "size-biased law undefined when m = 0");
  return draw(sb_cdf_, atoms_, rng);
}

int OffspringDistribution::sample_pair_biased(Stream& rng) const {
  if (factorial2_ <= 0.0) throw Error(ErrorCode::DegeneratePairs, "no offspring count >= 2 in support");
  return draw(pair_cdf_, atoms_, rng);
}

double OffspringDistribution::prob(int k) const noexcept {
  for (const auto& a : atoms_) {
    if (a.k == k) return a.p;
  }
  return 0.0;
}

}  // namespace gwspine
