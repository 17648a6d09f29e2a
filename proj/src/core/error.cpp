// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The hrbench Authors

#include "error.hpp"

namespace hrbench {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EmptySignal: return "EmptySignal";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::GuardUnsatisfied: return "GuardUnsatisfied";
    case ErrorKind::SplitInfeasible: return "SplitInfeasible";
    case ErrorKind::DegenerateScale: return "DegenerateScale";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::ContractViolation: return "ContractViolation";
    case ErrorKind::TrainingDiverged: return "TrainingDiverged";
    case ErrorKind::ThresholdUndefined: return "ThresholdUndefined";
    case ErrorKind::CIUndefined: return "CIUndefined";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Evaluation: return "EvaluationError";
  }
  return "Unknown";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

}  // namespace hrbench
