#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spectest {

enum class ErrorCode {
  ParameterOutOfRegion,
  DegenerateDimension,
  DimensionMismatch,
  NotPositiveDefinite,
  NotSymmetric,
  ConvergenceFailure,
  NoConvergence,
  InvalidRegion,
  RootFindingFailure,
  BranchAmbiguity,
  PoleProximity,
  ContourTooClose,
  SingularPairing,
  QuadratureFailure,
  DegenerateVariance,
  DegenerateTrace,
  GridEmpty,
  InvalidModel,
  InvalidConfig,
  ParseError,
  IoError,
  UsageError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ParameterOutOfRegion: return "ParameterOutOfRegion";
    case ErrorCode::DegenerateDimension: return "DegenerateDimension";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidRegion: return "InvalidRegion";
    case ErrorCode::RootFindingFailure: return "RootFindingFailure";
    case ErrorCode::BranchAmbiguity: return "BranchAmbiguity";
    case ErrorCode::PoleProximity: return "PoleProximity";
    case ErrorCode::ContourTooClose: return "ContourTooClose";
    case ErrorCode::SingularPairing: return "SingularPairing";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DegenerateTrace: return "DegenerateTrace";
    case ErrorCode::GridEmpty: return "GridEmpty";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can report it by name.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return to_string(code_); }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace spectest
