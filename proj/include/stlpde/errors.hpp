#pragma once

#include <stdexcept>
#include <string>

namespace stlpde {

enum class ErrorKind {
  Syntax,
  Semantics,
  EmptyWindow,
  DomainMismatch,
  SingularSystem,
  SolverFailed,
  ComboLimitExceeded,
  LpNumericalFailure,
  NoPreWindow,
  ScheduleConflict,
  NoPairs,
  EmptyInput,
  Io,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::Semantics: return "SemanticsError";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::DomainMismatch: return "DomainMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::SolverFailed: return "SolverFailed";
    case ErrorKind::ComboLimitExceeded: return "ComboLimitExceeded";
    case ErrorKind::LpNumericalFailure: return "LpNumericalFailure";
    case ErrorKind::NoPreWindow: return "NoPreWindow";
    case ErrorKind::ScheduleConflict: return "ScheduleConflict";
    case ErrorKind::NoPairs: return "NoPairs";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Error";
}

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for errors caused by the caller's input rather than by a solve.
  bool is_input_error() const noexcept {
    switch (kind_) {
      case ErrorKind::Syntax:
      case ErrorKind::Semantics:
      case ErrorKind::EmptyWindow:
      case ErrorKind::DomainMismatch:
      case ErrorKind::NoPreWindow:
      case ErrorKind::ScheduleConflict:
      case ErrorKind::EmptyInput:
      case ErrorKind::Io:
      case ErrorKind::Config:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
 public:
  explicit KindedError(const std::string& what) : Error(K, what) {}
};

using SyntaxError = KindedError<ErrorKind::Syntax>;
using SemanticsError = KindedError<ErrorKind::Semantics>;
using EmptyWindow = KindedError<ErrorKind::EmptyWindow>;
using DomainMismatch = KindedError<ErrorKind::DomainMismatch>;
using SingularSystem = KindedError<ErrorKind::SingularSystem>;
using SolverFailed = KindedError<ErrorKind::SolverFailed>;
using ComboLimitExceeded = KindedError<ErrorKind::ComboLimitExceeded>;
using LpNumericalFailure = KindedError<ErrorKind::LpNumericalFailure>;
using NoPreWindow = KindedError<ErrorKind::NoPreWindow>;
using ScheduleConflict = KindedError<ErrorKind::ScheduleConflict>;
using NoPairs = KindedError<ErrorKind::NoPairs>;
using EmptyInput = KindedError<ErrorKind::EmptyInput>;
using IoError = KindedError<ErrorKind::Io>;
using ConfigError = KindedError<ErrorKind::Config>;

}  // namespace stlpde
