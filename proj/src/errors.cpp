// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/errors.hpp"

namespace promptac {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfiguration: return "invalid-configuration";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kUnsupportedVariant: return "unsupported-variant";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidReward: return "invalid-reward";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kInvalidTask: return "invalid-task";
    case ErrorCode::kInvalidMetric: return "invalid-metric";
    case ErrorCode::kInvalidGold: return "invalid-gold";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kEvaluationAborted: return "evaluation-aborted";
    case ErrorCode::kInvalidCandidate: return "invalid-candidate";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kAlignment: return "alignment";
  }
  return "unknown";
}

}  // namespace promptac
