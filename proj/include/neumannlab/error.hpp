#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neumannlab {

enum class ErrorCode {
  InvalidArgument,
  ResonantSlope,
  NonC1Blend,
  DuplicateKnots,
  AnchorNotZero,
  AnchorSlopeNonNegative,
  AsymmetricSlopes,
  GridMismatch,
  MaxItersExceeded,
  DivergingIterates,
  PathCollapse,
  ModulusViolated,
  ReductionInapplicable,
  UnclassifiedDegenerate,
  RangeEscape,
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ResonantSlope: return "ResonantSlope";
    case ErrorCode::NonC1Blend: return "NonC1Blend";
    case ErrorCode::DuplicateKnots: return "DuplicateKnots";
    case ErrorCode::AnchorNotZero: return "AnchorNotZero";
    case ErrorCode::AnchorSlopeNonNegative: return "AnchorSlopeNonNegative";
    case ErrorCode::AsymmetricSlopes: return "AsymmetricSlopes";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::DivergingIterates: return "DivergingIterates";
    case ErrorCode::PathCollapse: return "PathCollapse";
    case ErrorCode::ModulusViolated: return "ModulusViolated";
    case ErrorCode::ReductionInapplicable: return "ReductionInapplicable";
    case ErrorCode::UnclassifiedDegenerate: return "UnclassifiedDegenerate";
    case ErrorCode::RangeEscape: return "RangeEscape";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code; every failure in the library
/// surfaces as one of these.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace neumannlab
