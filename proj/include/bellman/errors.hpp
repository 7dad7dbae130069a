#pragma once

#include <stdexcept>
#include <string>

namespace bellman {

/// Caller passed arguments that violate an operation's contract (bad
/// dimensions, negative time, non-positive tolerance, ...).
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point lies outside the domain of a candidate or special function.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A mathematical hypothesis required by a checker does not hold for the
/// supplied data (e.g. sign conditions, infeasible coefficient vector).
class precondition_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bellman
