#pragma once

#include <stdexcept>
#include <string>

namespace ntg {

// Invalid parameters, states, or configuration. The CLI maps this to exit code 2.
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

// A solver failed to reach its requested tolerance. The CLI maps this to exit code 3.
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

// Stationary distribution requested for a chain that does not have a unique one
// (mu = 0 leaves three absorbing monomorphic states).
struct nonergodic_error : validation_error {
  explicit nonergodic_error(const std::string& what) : validation_error(what) {}
};

}  // namespace ntg
