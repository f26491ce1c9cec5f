#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csfusion {

enum class ErrorCode {
  InvalidArgument,
  NonSymmetric,
  IndefiniteInput,
  DimensionMismatch,
  NonFiniteEvaluation,
  TooFewObservations,
  DegenerateDesign,
  NonFiniteTarget,
  SingleClass,
  EmptyInput,
  EmptyArm,
  InvalidDataset,
  SupportViolation,
  MassMismatch,
  LengthMismatch,
  SingularComposition,
  InvalidSpec,
  UnsupportedSpec,
  SchemaError,
  RowError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure raised by csfusion carries a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace csfusion
