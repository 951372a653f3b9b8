#pragma once

#include <stdexcept>
#include <string>

namespace mixsel {

/// Error categories; the CLI maps each to a process exit code.
enum class ErrorKind {
  usage = 2,
  validation = 3,
  numerical = 4,
  io = 5,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Short machine-greppable tag, e.g. "E_DATA".
  const char* code() const noexcept {
    switch (kind_) {
      case ErrorKind::usage: return "E_USAGE";
      case ErrorKind::validation: return "E_DATA";
      case ErrorKind::numerical: return "E_NUMERIC";
      case ErrorKind::io: return "E_IO";
    }
    return "E_UNKNOWN";
  }

private:
  ErrorKind kind_;
};

class UsageError : public Error {
public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// A K×K block of a cell covariance is singular or too ill-conditioned to invert.
class SingularSubmatrix : public Error {
public:
  /// cell is one-based; 0 denotes the pooled within-group covariance.
  SingularSubmatrix(int cell, std::string subset, double condition)
      : Error(ErrorKind::numerical,
              (cell > 0 ? "singular covariance submatrix in cell " + std::to_string(cell)
                        : std::string("singular pooled within-group covariance")) +
                  " on variables " + subset + " (condition number " + std::to_string(condition) + ")"),
        cell_(cell),
        subset_(std::move(subset)) {}

  int cell() const noexcept { return cell_; }
  const std::string& subset() const noexcept { return subset_; }

private:
  int cell_;
  std::string subset_;
};

/// Classification rule is undefined for a cell (zero estimated cell probability).
class UndefinedCell : public Error {
public:
  explicit UndefinedCell(int cell)
      : Error(ErrorKind::numerical, "classification rule undefined for cell " + std::to_string(cell) +
                                        " (zero cell probability for a group)"),
        cell_(cell) {}

  int cell() const noexcept { return cell_; }

private:
  int cell_;
};

}  // namespace mixsel
