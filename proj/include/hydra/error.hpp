// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_ERROR_HPP_
#define HYDRA_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace hydra {

enum class ErrorKind {
  InvalidConfig,
  ShapeMismatch,
  DegenerateNorm,
  SequenceTooLong,
  BadToken,
  InvalidNode,
  EmptyPool,
  InvalidAblation,
  ConflictingIntervention,
  ContextMismatch,
  DegenerateRegression,
  ExhibitInvalid,
  VerificationFailed,
  ParseError,
  UnknownToken,
  PoolTooSmall,
  EmptyDataset,
  IoError,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DegenerateNorm: return "DegenerateNorm";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::BadToken: return "BadToken";
    case ErrorKind::InvalidNode: return "InvalidNode";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::InvalidAblation: return "InvalidAblation";
    case ErrorKind::ConflictingIntervention: return "ConflictingIntervention";
    case ErrorKind::ContextMismatch: return "ContextMismatch";
    case ErrorKind::DegenerateRegression: return "DegenerateRegression";
    case ErrorKind::ExhibitInvalid: return "ExhibitInvalid";
    case ErrorKind::VerificationFailed: return "VerificationFailed";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownToken: return "UnknownToken";
    case ErrorKind::PoolTooSmall: return "PoolTooSmall";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// All library failures are reported as hydra::Error carrying a kind that the
/// CLI maps onto its exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

// 2 config error, 3 data error, 4 numerical/verification failure.
constexpr int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidAblation:
    case ErrorKind::InvalidNode:
    case ErrorKind::ConflictingIntervention:
      return 2;
    case ErrorKind::ParseError:
    case ErrorKind::UnknownToken:
    case ErrorKind::BadToken:
    case ErrorKind::SequenceTooLong:
    case ErrorKind::PoolTooSmall:
    case ErrorKind::EmptyDataset:
    case ErrorKind::EmptyPool:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::IoError:
    case ErrorKind::ContextMismatch:
      return 3;
    case ErrorKind::DegenerateNorm:
    case ErrorKind::DegenerateRegression:
    case ErrorKind::ExhibitInvalid:
    case ErrorKind::VerificationFailed:
      return 4;
  }
  return 4;
}

}  // namespace hydra

#endif  // HYDRA_ERROR_HPP_
