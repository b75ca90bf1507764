// cchsh - error codes and the shared exception type

#ifndef CCHSH_ERROR_HPP_
#define CCHSH_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace cchsh {

enum class ErrorCode {
  // geometry
  DegenerateMetric,
  IntegrationDiverged,
  NoConvergence,
  WrongCausalType,
  BaseMismatch,
  OrthogonalProjection,
  OpenLoop,
  ChartEscape,
  // scenario
  NoInterception,
  // dynamics
  ResolutionTooLow,
  SeedRequired,
  // inverse
  EmptyTargets,
  // worldviews
  UnknownPoint,
  UnknownField,
  CycleDetected,
  StateSpaceTooLarge,
  PosetTooLarge,
  ShapeMismatch,
  ZeroConditioningMass,
  // sweep
  TooManyFailures,
  // config / io
  ConfigError,
  IoError,
  Internal,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}
  Error(ErrorCode code, std::string message, std::string field)
      : std::runtime_error(std::move(message)), code_(code), field_(std::move(field)) {}

  ErrorCode code() const { return code_; }
  // Config-style field path ("scenario.tau_emit"), empty when not applicable.
  const std::string& field() const { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

inline const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::IntegrationDiverged: return "IntegrationDiverged";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::WrongCausalType: return "WrongCausalType";
    case ErrorCode::BaseMismatch: return "BaseMismatch";
    case ErrorCode::OrthogonalProjection: return "OrthogonalProjection";
    case ErrorCode::OpenLoop: return "OpenLoop";
    case ErrorCode::ChartEscape: return "ChartEscape";
    case ErrorCode::NoInterception: return "NoInterception";
    case ErrorCode::ResolutionTooLow: return "ResolutionTooLow";
    case ErrorCode::SeedRequired: return "SeedRequired";
    case ErrorCode::EmptyTargets: return "EmptyTargets";
    case ErrorCode::UnknownPoint: return "UnknownPoint";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::PosetTooLarge: return "PosetTooLarge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroConditioningMass: return "ZeroConditioningMass";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace cchsh

#endif  // CCHSH_ERROR_HPP_
