#pragma once

#include <stdexcept>
#include <string>

namespace flowmesh {

/// Failure categories. The command-line tools map these onto exit codes
/// (see exit_code_for).
enum class ErrorKind {
  Structural,     // malformed mesh topology, bad indices, size mismatches
  Configuration,  // invalid parameters or missing inputs
  Io,             // unreadable / unwritable files, codec failures
  Degenerate,     // zero-area faces, zero-length edges
  EmptyResult,    // a stage produced nothing usable
  Numerical,      // non-finite values, singular systems, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& what) : Error(ErrorKind::Structural, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Configuration, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& what) : Error(ErrorKind::Degenerate, what) {}
};

class EmptyResultError : public Error {
 public:
  explicit EmptyResultError(const std::string& what) : Error(ErrorKind::EmptyResult, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

/// Raised by the global solve when a movable component has nothing pinning it.
class RankError : public NumericalError {
 public:
  explicit RankError(const std::string& what) : NumericalError(what) {}
};

/// 0 success, 2 user error, 3 empty/degenerate result, 4 numerical failure.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Structural:
    case ErrorKind::Configuration:
    case ErrorKind::Io:
      return 2;
    case ErrorKind::Degenerate:
    case ErrorKind::EmptyResult:
      return 3;
    case ErrorKind::Numerical:
      return 4;
  }
  return 2;
}

}  // namespace flowmesh
