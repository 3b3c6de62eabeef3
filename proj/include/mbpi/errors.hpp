#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mbpi {

enum class ErrorCode {
  MalformedInput,
  DimensionMismatch,
  NegativeRate,
  DiagonalMismatch,
  Singular,
  NotPositivelyRegular,
  OutOfDomain,
  InvalidArgument,
  NoConvergence,
  PivotNotAllowed,
  StiffnessFailure,
  NotApplicable,
  IndeterminateJ,
  QuadratureFailure,
  NotAlmostSurelyExtinct,
  WrongEncoding,
  NotErgodic,
  TruncationResidualTooLarge,
  NotCommunicating,
  NonPositiveCoefficient,
  NonConservativeModel,
  DegenerateEstimate,
  CapTooSmall,
  SingularSystem,
  Underflow,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::DiagonalMismatch: return "DiagonalMismatch";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NotPositivelyRegular: return "NotPositivelyRegular";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::PivotNotAllowed: return "PivotNotAllowed";
    case ErrorCode::StiffnessFailure: return "StiffnessFailure";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::IndeterminateJ: return "IndeterminateJ";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::NotAlmostSurelyExtinct: return "NotAlmostSurelyExtinct";
    case ErrorCode::WrongEncoding: return "WrongEncoding";
    case ErrorCode::NotErgodic: return "NotErgodic";
    case ErrorCode::TruncationResidualTooLarge: return "TruncationResidualTooLarge";
    case ErrorCode::NotCommunicating: return "NotCommunicating";
    case ErrorCode::NonPositiveCoefficient: return "NonPositiveCoefficient";
    case ErrorCode::NonConservativeModel: return "NonConservativeModel";
    case ErrorCode::DegenerateEstimate: return "DegenerateEstimate";
    case ErrorCode::CapTooSmall: return "CapTooSmall";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::Underflow: return "Underflow";
  }
  return "Unknown";
}

/// Input problems (bad files, invalid models) as opposed to violated
/// preconditions of an otherwise valid request.
constexpr bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NegativeRate:
    case ErrorCode::DiagonalMismatch:
    case ErrorCode::Singular:
    case ErrorCode::NotPositivelyRegular:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mbpi
