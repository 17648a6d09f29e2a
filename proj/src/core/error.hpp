// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#pragma once

#include <stdexcept>
#include <string>

namespace hrbench {

enum class ErrorKind {
  EmptySignal,
  InvalidInput,
  GuardUnsatisfied,
  SplitInfeasible,
  DegenerateScale,
  Shape,
  ContractViolation,
  TrainingDiverged,
  ThresholdUndefined,
  CIUndefined,
  Config,
  Io,
  Evaluation,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so the C API can map it
/// onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace hrbench
