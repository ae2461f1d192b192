#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gwspine {

enum class ErrorCode {
  EmptySupport,
  NegativeWeight,
  PositiveP1,
  ZeroMean,
  InvalidArgument,
  PopulationCapExceeded,
  BeyondHorizon,
  NotAlive,
  NonFiniteState,
  KernelArityMismatch,
  PathsNotRecorded,
  StateNotRecorded,
  Subcritical,
  DegeneratePairs,
  DivergenceDetected,
  QuadratureUnderResolved,
  AllExtinct,
  GridUnderResolved,
  UnknownModel,
  InvalidParameters,
  ConfigError,
  UnknownSeries,
  UnknownCheck,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; `code()` identifies the
// contract violation so callers can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gwspine
