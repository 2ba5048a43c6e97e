#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pibench {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when caller-supplied data violates a documented precondition.
class InvalidInput : public std::invalid_argument {
  public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an internal invariant fails (a bug or a numerical breakdown).
class InternalError : public std::logic_error {
  public:
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidInput(message);
}

inline void ensure(bool condition, const std::string& message) {
    if (!condition) throw InternalError(message);
}

} // namespace detail
} // namespace pibench
