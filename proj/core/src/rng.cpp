#include "gwspine/rng.hpp"

#include <cmath>

#include "gwspine/error.hpp"

namespace gwspine {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::PositiveP1: return "PositiveP1";
    case ErrorCode::ZeroMean: return "ZeroMean";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PopulationCapExceeded: return "PopulationCapExceeded";
    case ErrorCode::BeyondHorizon: return "BeyondHorizon";
    case ErrorCode::NotAlive: return "NotAlive";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::KernelArityMismatch: return "KernelArityMismatch";
    case ErrorCode::PathsNotRecorded: return "PathsNotRecorded";
    case ErrorCode::StateNotRecorded: return "StateNotRecorded";
    case ErrorCode::Subcritical: return "Subcritical";
    case ErrorCode::DegeneratePairs: return "DegeneratePairs";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::QuadratureUnderResolved: return "QuadratureUnderResolved";
    case ErrorCode::AllExtinct: return "AllExtinct";
    case ErrorCode::GridUnderResolved: return "GridUnderResolved";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnknownSeries: return "UnknownSeries";
    case ErrorCode::UnknownCheck: return "UnknownCheck";
  }
  return "Unknown";
}

Stream::Stream(std::uint64_t key) noexcept : key_(key) {
  std::uint64_t z = key;
  for (auto& word : s_) {
    z += 0x9e3779b97f4a7c15ULL;
    word = mix64(z);
  }
}

double Stream::normal() { return normal_(*this); }

double Stream::exponential(double rate) { return -std::log(uniform()) / rate; }

std::uint64_t Stream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(*this);
}

std::uint64_t Stream::below(std::uint64_t n) noexcept {
  const auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

}  // namespace gwspine
