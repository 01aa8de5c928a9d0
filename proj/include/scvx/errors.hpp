#pragma once

#include <stdexcept>
#include <string>

namespace scvx {

// Arc-length parametrization breaks down when s_dot approaches zero or the
// curvature center is crossed (1 - kappa*e_y = 0).
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when scenario or configuration input violates a documented invariant.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised for conditions that indicate a bug rather than bad input, e.g. a
// subproblem reported primal-infeasible despite virtual control.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace scvx
