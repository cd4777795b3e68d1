#pragma once

#include <stdexcept>
#include <string>

namespace lmp {

enum class ErrorCode {
  DegenerateInput,
  InvalidRotation,
  EmptyInput,
  ZeroWeightSum,
  LengthMismatch,
  UnnormalizedInput,
  SourceTooShort,
  NonFiniteLoss,
  EmptyCloud,
  UntrainedInitEncoder,
  ResolutionTooHigh,
  ParseError,
  SchemaVersionMismatch,
  InsufficientDiversity,
  NonFiniteObjective,
  InvalidConfig,
  IoError,
};

const char* error_code_name(ErrorCode code);

// All recoverable failures carry a machine-parsable category plus a human
// readable message. The CLI prints "<category>: <message>" on one line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const { return code_; }
  const std::string& message() const { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace lmp
