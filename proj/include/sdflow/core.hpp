#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sdflow {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
constexpr Scalar plus_infinity() {
  return std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
bool is_finite(Scalar v) {
  return std::isfinite(v);
}

/// Thrown when a caller breaks a documented precondition (dimension
/// mismatch, parameter out of range, unsupported combination).
class contract_violation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative numeric routine fails to converge. Carries the
/// best bound (or residual) reached before giving up.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what,
                         double best_bound = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), best_bound_(best_bound) {}

  double best_bound() const { return best_bound_; }

 private:
  double best_bound_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw contract_violation(message);
}

/// Symplectic map J(p,q) = (-q, p) acting blockwise on a vector of even size.
/// Satisfies J^2 = -I, J^T = -J, and preserves the Euclidean norm.
template <typename Derived>
VectorX<typename Derived::Scalar> apply_J(const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = u.size();
  require(n % 2 == 0, "apply_J: vector size must be even, got " + std::to_string(n));
  const Eigen::Index half = n / 2;
  VectorX<Scalar> out(n);
  out.head(half) = -u.tail(half);
  out.tail(half) = u.head(half);
  return out;
}

}  // namespace sdflow
