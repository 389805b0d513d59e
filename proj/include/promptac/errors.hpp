// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace promptac {

enum class ErrorCode {
  kInvalidConfiguration,
  kShape,
  kNumeric,
  kUnsupportedVariant,
  kInvalidArgument,
  kInvalidReward,
  kTransport,
  kProtocol,
  kInvalidTask,
  kInvalidMetric,
  kInvalidGold,
  kParse,
  kEvaluationAborted,
  kInvalidCandidate,
  kInsufficientData,
  kAlignment,
};

const char* to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code lets
/// callers (and tests) branch on the failure class without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Non-finite value met during a parameter update; carries the layer index.
class NumericError : public Error {
 public:
  NumericError(std::size_t layer, const std::string& what)
      : Error(ErrorCode::kNumeric, what), layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// Schema violation while reading a task or config file.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error(ErrorCode::kParse, what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Transport failure talking to an endpoint. `retryable` is false once the
/// retry budget is exhausted or the server rejected the request outright.
class TransportError : public Error {
 public:
  TransportError(bool retryable, int status, const std::string& what)
      : Error(ErrorCode::kTransport, what), retryable_(retryable), status_(status) {}

  bool retryable() const noexcept { return retryable_; }
  int status() const noexcept { return status_; }

 private:
  bool retryable_;
  int status_;
};

/// Raised when an optimization run cannot continue; `step` is the 1-based
/// step that failed (0 when the failure happened outside the loop).
class RunAborted : public Error {
 public:
  RunAborted(std::size_t step, const std::string& what)
      : Error(ErrorCode::kEvaluationAborted, what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace promptac
