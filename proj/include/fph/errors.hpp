#pragma once

#include <stdexcept>
#include <string>

namespace fph {

/// Stable process exit codes, one per error class (see README).
enum class ErrorCode : int {
    ok = 0,
    usage = 1,
    parse = 2,
    invariant = 3,
    capacity = 4,
    nonconvergence = 5,
    numerical = 6,
};

/// Base of all library errors. Carries the exit code the CLI maps it to.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

/// Malformed input file (bad JSON, wrong schema, unknown field).
class ParseError : public Error {
  public:
    explicit ParseError(const std::string& what) : Error(ErrorCode::parse, what) {}
};

/// A domain invariant does not hold (bad graph, bad policy, off-support query).
class InvariantError : public Error {
  public:
    explicit InvariantError(const std::string& what) : Error(ErrorCode::invariant, what) {}
};

/// A configurable resource limit was exceeded (trajectory count, pair budget).
class CapacityError : public Error {
  public:
    explicit CapacityError(const std::string& what) : Error(ErrorCode::capacity, what) {}
};

/// Numerical failure (singular chain, stiff step collapse, drift blow-up).
class NumericalError : public Error {
  public:
    explicit NumericalError(const std::string& what) : Error(ErrorCode::numerical, what) {}
};

} // namespace fph
