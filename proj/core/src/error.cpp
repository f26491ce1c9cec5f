#include "csfusion/error.hpp"

namespace csfusion {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::IndefiniteInput: return "IndefiniteInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::NonFiniteTarget: return "NonFiniteTarget";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::SupportViolation: return "SupportViolation";
    case ErrorCode::MassMismatch: return "MassMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SingularComposition: return "SingularComposition";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::UnsupportedSpec: return "UnsupportedSpec";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::RowError: return "RowError";
  }
  return "Unknown";
}

}  // namespace csfusion
