#pragma once

#include <stdexcept>
#include <string>

namespace sls {

/// Input outside the mathematical domain of an operation (bad shapes, negative radii, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A model could not be constructed from otherwise well-formed parameters.
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition on an operation's inputs does not hold.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require_domain(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace detail
}  // namespace sls
