#include "lmp/error.hpp"

namespace lmp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ZeroWeightSum: return "ZeroWeightSum";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnnormalizedInput: return "UnnormalizedInput";
    case ErrorCode::SourceTooShort: return "SourceTooShort";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::UntrainedInitEncoder: return "UntrainedInitEncoder";
    case ErrorCode::ResolutionTooHigh: return "ResolutionTooHigh";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::InsufficientDiversity: return "InsufficientDiversity";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace lmp
