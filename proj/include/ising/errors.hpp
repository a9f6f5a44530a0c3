#pragma once

#include <stdexcept>
#include <string>

namespace ising {

// Malformed input: size mismatch, out-of-range site, empty flip set, ...
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Quantity undefined for the given coupling, e.g. Gibbs operations at J = inf.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Exponential-cost operation requested beyond its size cap.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition (e.g. a non-reversible kernel).
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace ising
