#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sdflow/core.hpp"

namespace sdflow {

/// Capability flags of a convex function. `smooth`, `prox_exact` and
/// `has_closed_conjugate` follow the usual convex-calculus meaning;
/// `conjugate_finite` / `conjugate_smooth` describe f* and drive the
/// solver's regularization decisions.
struct Capabilities {
  bool smooth = false;
  bool prox_exact = false;
  bool has_closed_conjugate = false;
  bool conjugate_finite = false;
  bool conjugate_smooth = false;
};

// Membership tolerance for indicator set boundaries.
inline constexpr double kIndicatorTol = 1e-12;

namespace detail {

template <typename Scalar>
class ConvexTerm {
 public:
  using Vector = VectorX<Scalar>;
  using Ref = Eigen::Ref<const Vector>;

  virtual ~ConvexTerm() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual const Capabilities& caps() const = 0;
  virtual std::string name() const = 0;

  /// f(x); may be +inf.
  virtual Scalar value(const Ref& x) const = 0;

  /// An element of the subdifferential at x (the gradient when smooth).
  virtual Vector subgradient(const Ref& x) const = 0;

  /// argmin_p { f(p) + |x-p|^2 / (2 lambda) }.
  virtual Vector prox(Scalar lambda, const Ref& x) const = 0;

  /// f*(y) in closed form; only valid when caps().has_closed_conjugate.
  virtual Scalar conjugate_value(const Ref&) const {
    throw contract_violation(name() + ": no closed-form conjugate");
  }

  /// An element of the subdifferential of f* at y, i.e. a maximizer of
  /// <x,y> - f(x). Only valid when caps().has_closed_conjugate.
  virtual Vector conjugate_subgradient(const Ref&) const {
    throw contract_violation(name() + ": no closed-form conjugate subgradient");
  }
};

}  // namespace detail

/// A proper convex lower semi-continuous function on R^d, with evaluation,
/// subgradient, proximal map, and (when available) closed-form conjugate.
/// Immutable value type; copies share the underlying description, so all
/// operations are safe to call concurrently.
template <typename Scalar = double>
class ConvexFunction {
 public:
  using Vector = VectorX<Scalar>;
  using Ref = Eigen::Ref<const Vector>;

  ConvexFunction() = default;
  explicit ConvexFunction(std::shared_ptr<const detail::ConvexTerm<Scalar>> term)
      : term_(std::move(term)) {}

  bool valid() const { return term_ != nullptr; }
  Eigen::Index dimension() const { return term().dimension(); }
  const Capabilities& capabilities() const { return term().caps(); }
  std::string name() const { return term().name(); }

  Scalar value(const Ref& x) const {
    check_dim(x, "value");
    return term().value(x);
  }

  Vector subgradient(const Ref& x) const {
    check_dim(x, "subgradient");
    return term().subgradient(x);
  }

  Vector prox(Scalar lambda, const Ref& x) const {
    if (!(lambda > Scalar(0)))
      throw contract_violation(name() + ": prox requires lambda > 0");
    check_dim(x, "prox");
    return term().prox(lambda, x);
  }

  Scalar conjugate_value(const Ref& y) const {
    check_dim(y, "conjugate_value");
    return term().conjugate_value(y);
  }

  Vector conjugate_subgradient(const Ref& y) const {
    check_dim(y, "conjugate_subgradient");
    return term().conjugate_subgradient(y);
  }

  const detail::ConvexTerm<Scalar>& term() const {
    if (!term_) throw contract_violation("ConvexFunction: empty");
    return *term_;
  }

 private:
  void check_dim(const Ref& x, const char* op) const {
    if (x.size() != dimension())
      throw contract_violation(name() + std::string(": ") + op +
                               ": dimension mismatch, expected " + std::to_string(dimension()) +
                               ", got " + std::to_string(x.size()));
  }

  std::shared_ptr<const detail::ConvexTerm<Scalar>> term_;
};

using ConvexFunctiond = ConvexFunction<double>;

namespace detail {

template <typename Scalar>
class ZeroTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  explicit ZeroTerm(Eigen::Index d) : d_(d) {
    caps_.smooth = true;
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = false;  // conjugate is the indicator of {0}
    caps_.conjugate_smooth = false;
  }

  Eigen::Index dimension() const override { return d_; }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "zero"; }

  Scalar value(const Ref&) const override { return Scalar(0); }
  Vector subgradient(const Ref&) const override { return Vector::Zero(d_); }
  Vector prox(Scalar, const Ref& x) const override { return x; }

  Scalar conjugate_value(const Ref& y) const override {
    return y.template lpNorm<Eigen::Infinity>() <= Scalar(kIndicatorTol)
               ? Scalar(0)
               : plus_infinity<Scalar>();
  }
  Vector conjugate_subgradient(const Ref&) const override { return Vector::Zero(d_); }

 private:
  Eigen::Index d_;
  Capabilities caps_;
};

template <typename Scalar>
class ScaledSquaredNormTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  ScaledSquaredNormTerm(Scalar sigma, Eigen::Index d) : sigma_(sigma), d_(d) {
    require(sigma > Scalar(0), "scaled_squared_norm: sigma must be > 0");
    caps_ = {true, true, true, true, true};
  }

  Eigen::Index dimension() const override { return d_; }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "scaled_squared_norm"; }

  Scalar value(const Ref& x) const override { return Scalar(0.5) * sigma_ * x.squaredNorm(); }
  Vector subgradient(const Ref& x) const override { return sigma_ * x; }
  Vector prox(Scalar lambda, const Ref& x) const override {
    return x / (Scalar(1) + lambda * sigma_);
  }
  Scalar conjugate_value(const Ref& y) const override {
    return y.squaredNorm() / (Scalar(2) * sigma_);
  }
  Vector conjugate_subgradient(const Ref& y) const override { return y / sigma_; }

 private:
  Scalar sigma_;
  Eigen::Index d_;
  Capabilities caps_;
};

/// f(x) = (1/2) x^T A x + <b,x> + c with A symmetric PSD. Three regimes:
/// A = 0 (affine: conjugate is an indicator of {b}), A positive definite
/// (fully closed-form conjugate), and singular PSD (no closed conjugate).
/// The spectral classification of A is shared so that time-dependent
/// potentials varying only in the drift b(t) stay cheap to sample.
template <typename Scalar>
struct QuadraticCore {
  using Matrix = MatrixX<Scalar>;
  enum class Mode { Affine, PositiveDefinite, SingularPsd };

  explicit QuadraticCore(Matrix mat) : A(std::move(mat)) {
    require(A.rows() == A.cols(), "quadratic: A must be square");
    require(A.isApprox(A.transpose(), Scalar(1e-12)), "quadratic: A must be symmetric");
    const Scalar scale = A.template lpNorm<Eigen::Infinity>();
    if (scale == Scalar(0)) {
      mode = Mode::Affine;
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> es(A);
      const Scalar min_ev = es.eigenvalues().minCoeff();
      const Scalar max_ev = es.eigenvalues().maxCoeff();
      require(min_ev >= -Scalar(1e-10) * std::max(Scalar(1), max_ev),
              "quadratic: A must be positive semidefinite");
      if (min_ev > Scalar(1e-10) * max_ev) {
        mode = Mode::PositiveDefinite;
        llt.compute(A);
      } else {
        mode = Mode::SingularPsd;
      }
    }
  }

  Matrix A;
  Mode mode = Mode::Affine;
  Eigen::LLT<Matrix> llt;
};

template <typename Scalar>
class QuadraticTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;
  using Matrix = MatrixX<Scalar>;
  using Core = QuadraticCore<Scalar>;
  using Mode = typename Core::Mode;

  QuadraticTerm(std::shared_ptr<const Core> core, Vector b, Scalar c)
      : core_(std::move(core)), b_(std::move(b)), c_(c) {
    require(core_->A.rows() == b_.size(), "quadratic: A and b dimension mismatch");
    caps_.smooth = true;
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = (core_->mode != Mode::SingularPsd);
    caps_.conjugate_finite = (core_->mode == Mode::PositiveDefinite);
    caps_.conjugate_smooth = (core_->mode == Mode::PositiveDefinite);
  }

  Eigen::Index dimension() const override { return b_.size(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "quadratic"; }

  Scalar value(const Ref& x) const override {
    return Scalar(0.5) * x.dot(core_->A * x) + b_.dot(x) + c_;
  }
  Vector subgradient(const Ref& x) const override { return core_->A * x + b_; }

  Vector prox(Scalar lambda, const Ref& x) const override {
    if (core_->mode == Mode::Affine) return x - lambda * b_;
    Matrix M = lambda * core_->A;
    M.diagonal().array() += Scalar(1);
    return M.ldlt().solve(x - lambda * b_);
  }

  Scalar conjugate_value(const Ref& y) const override {
    if (core_->mode == Mode::Affine) {
      return (y - b_).template lpNorm<Eigen::Infinity>() <=
                     Scalar(kIndicatorTol) * (Scalar(1) + b_.template lpNorm<Eigen::Infinity>())
                 ? -c_
                 : plus_infinity<Scalar>();
    }
    require(core_->mode == Mode::PositiveDefinite,
            "quadratic: conjugate needs A positive definite");
    const Vector z = core_->llt.solve(y - b_);
    return Scalar(0.5) * (y - b_).dot(z) - c_;
  }

  Vector conjugate_subgradient(const Ref& y) const override {
    if (core_->mode == Mode::Affine) return Vector::Zero(b_.size());
    require(core_->mode == Mode::PositiveDefinite,
            "quadratic: conjugate needs A positive definite");
    return core_->llt.solve(y - b_);
  }

  const Matrix& matrix() const { return core_->A; }
  const Vector& linear() const { return b_; }

 private:
  std::shared_ptr<const Core> core_;
  Vector b_;
  Scalar c_;
  Capabilities caps_;
};

template <typename Scalar>
class IndicatorPointTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  explicit IndicatorPointTerm(Vector anchor) : anchor_(std::move(anchor)) {
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = true;   // support function <anchor, y>
    caps_.conjugate_smooth = true;
  }

  Eigen::Index dimension() const override { return anchor_.size(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "indicator_point"; }

  Scalar value(const Ref& x) const override {
    const Scalar tol =
        Scalar(kIndicatorTol) * (Scalar(1) + anchor_.template lpNorm<Eigen::Infinity>());
    return (x - anchor_).template lpNorm<Eigen::Infinity>() <= tol ? Scalar(0)
                                                                   : plus_infinity<Scalar>();
  }
  Vector subgradient(const Ref& x) const override {
    require(is_finite(value(x)), "indicator_point: subgradient outside the set");
    return Vector::Zero(anchor_.size());
  }
  Vector prox(Scalar, const Ref&) const override { return anchor_; }
  Scalar conjugate_value(const Ref& y) const override { return anchor_.dot(y); }
  Vector conjugate_subgradient(const Ref&) const override { return anchor_; }

 private:
  Vector anchor_;
  Capabilities caps_;
};

template <typename Scalar>
class IndicatorBoxTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  IndicatorBoxTerm(Vector lo, Vector hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    require(lo_.size() == hi_.size(), "indicator_box: bound dimension mismatch");
    require((lo_.array() <= hi_.array()).all(), "indicator_box: requires lo <= hi");
    require(lo_.allFinite() && hi_.allFinite(), "indicator_box: bounds must be finite");
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = true;
  }

  Eigen::Index dimension() const override { return lo_.size(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "indicator_box"; }

  Scalar value(const Ref& x) const override {
    const Scalar tol = Scalar(kIndicatorTol) *
                       (Scalar(1) + std::max(lo_.template lpNorm<Eigen::Infinity>(),
                                             hi_.template lpNorm<Eigen::Infinity>()));
    const bool inside =
        (x.array() >= lo_.array() - tol).all() && (x.array() <= hi_.array() + tol).all();
    return inside ? Scalar(0) : plus_infinity<Scalar>();
  }
  Vector subgradient(const Ref& x) const override {
    require(is_finite(value(x)), "indicator_box: subgradient outside the set");
    return Vector::Zero(lo_.size());
  }
  Vector prox(Scalar, const Ref& x) const override {
    return x.cwiseMax(lo_).cwiseMin(hi_);
  }
  Scalar conjugate_value(const Ref& y) const override {
    // support function: sum_i max(lo_i y_i, hi_i y_i)
    return (y.array() * lo_.array()).max(y.array() * hi_.array()).sum();
  }
  Vector conjugate_subgradient(const Ref& y) const override {
    Vector out(lo_.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] > Scalar(0))
        out[i] = hi_[i];
      else if (y[i] < Scalar(0))
        out[i] = lo_[i];
      else
        out[i] = std::min(std::max(Scalar(0), lo_[i]), hi_[i]);
    }
    return out;
  }

 private:
  Vector lo_, hi_;
  Capabilities caps_;
};

template <typename Scalar>
class IndicatorBallTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  IndicatorBallTerm(Vector center, Scalar radius)
      : center_(std::move(center)), radius_(radius) {
    require(radius_ >= Scalar(0), "indicator_ball: radius must be >= 0");
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = true;
  }

  Eigen::Index dimension() const override { return center_.size(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "indicator_ball"; }

  Scalar value(const Ref& x) const override {
    const Scalar tol = Scalar(kIndicatorTol) * (Scalar(1) + radius_);
    return (x - center_).norm() <= radius_ + tol ? Scalar(0) : plus_infinity<Scalar>();
  }
  Vector subgradient(const Ref& x) const override {
    require(is_finite(value(x)), "indicator_ball: subgradient outside the set");
    return Vector::Zero(center_.size());
  }
  Vector prox(Scalar, const Ref& x) const override {
    const Vector r = x - center_;
    const Scalar n = r.norm();
    if (n <= radius_) return x;
    return center_ + (radius_ / n) * r;
  }
  Scalar conjugate_value(const Ref& y) const override {
    return center_.dot(y) + radius_ * y.norm();
  }
  Vector conjugate_subgradient(const Ref& y) const override {
    const Scalar n = y.norm();
    if (n == Scalar(0)) return center_;
    return center_ + (radius_ / n) * y;
  }

 private:
  Vector center_;
  Scalar radius_;
  Capabilities caps_;
};

/// Indicator of the affine subspace { x : C x = rhs }.
template <typename Scalar>
class IndicatorAffineTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;
  using Matrix = MatrixX<Scalar>;

  IndicatorAffineTerm(Matrix C, Vector rhs) : C_(std::move(C)), rhs_(std::move(rhs)) {
    require(C_.rows() == rhs_.size(), "indicator_affine: C and rhs dimension mismatch");
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(C_);
    pinv_ = cod.pseudoInverse();
    anchor_ = pinv_ * rhs_;  // min-norm solution
    require((C_ * anchor_ - rhs_).template lpNorm<Eigen::Infinity>() <=
                Scalar(1e-10) * (Scalar(1) + rhs_.template lpNorm<Eigen::Infinity>()),
            "indicator_affine: system C x = rhs has no solution (empty set)");
    row_space_projector_ = pinv_ * C_;
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = false;  // support function infinite off the row space
  }

  Eigen::Index dimension() const override { return C_.cols(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "indicator_affine"; }

  Scalar value(const Ref& x) const override {
    const Scalar tol =
        Scalar(kIndicatorTol) * (Scalar(1) + rhs_.template lpNorm<Eigen::Infinity>() +
                                 x.template lpNorm<Eigen::Infinity>());
    return (C_ * x - rhs_).template lpNorm<Eigen::Infinity>() <= tol ? Scalar(0)
                                                                     : plus_infinity<Scalar>();
  }
  Vector subgradient(const Ref& x) const override {
    require(is_finite(value(x)), "indicator_affine: subgradient outside the set");
    return Vector::Zero(dimension());
  }
  Vector prox(Scalar, const Ref& x) const override { return x - pinv_ * (C_ * x - rhs_); }

  Scalar conjugate_value(const Ref& y) const override {
    // sigma(y) = <anchor, y> when y is in range(C^T), +inf otherwise.
    const Vector proj = row_space_projector_ * y;
    const Scalar tol = Scalar(1e-10) * (Scalar(1) + y.norm());
    return (y - proj).norm() <= tol ? anchor_.dot(y) : plus_infinity<Scalar>();
  }
  Vector conjugate_subgradient(const Ref&) const override { return anchor_; }

 private:
  Matrix C_;
  Vector rhs_;
  Matrix pinv_;
  Matrix row_space_projector_;
  Vector anchor_;
  Capabilities caps_;
};

template <typename Scalar>
class ScaledL1Term final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  ScaledL1Term(Scalar s, Eigen::Index d) : s_(s), d_(d) {
    require(s_ > Scalar(0), "scaled_l1: scale must be > 0");
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = false;  // indicator of the dual box
  }

  Eigen::Index dimension() const override { return d_; }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "scaled_l1"; }

  Scalar value(const Ref& x) const override { return s_ * x.template lpNorm<1>(); }
  Vector subgradient(const Ref& x) const override {
    return s_ * x.array().sign().matrix();
  }
  Vector prox(Scalar lambda, const Ref& x) const override {
    const Scalar t = lambda * s_;
    return x.array().sign() * (x.array().abs() - t).max(Scalar(0));
  }
  Scalar conjugate_value(const Ref& y) const override {
    const Scalar tol = Scalar(kIndicatorTol) * (Scalar(1) + s_);
    return y.template lpNorm<Eigen::Infinity>() <= s_ + tol ? Scalar(0)
                                                            : plus_infinity<Scalar>();
  }
  Vector conjugate_subgradient(const Ref&) const override { return Vector::Zero(d_); }

 private:
  Scalar s_;
  Eigen::Index d_;
  Capabilities caps_;
};

/// Direct sum f(x) = sum_i f_i(x_{I_i}) over consecutive blocks.
template <typename Scalar>
class SeparableSumTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  explicit SeparableSumTerm(std::vector<ConvexFunction<Scalar>> parts)
      : parts_(std::move(parts)) {
    require(!parts_.empty(), "separable_sum: needs at least one part");
    offsets_.reserve(parts_.size());
    Eigen::Index off = 0;
    caps_ = {true, true, true, true, true};
    for (const auto& p : parts_) {
      offsets_.push_back(off);
      off += p.dimension();
      const auto& c = p.capabilities();
      caps_.smooth &= c.smooth;
      caps_.prox_exact &= c.prox_exact;
      caps_.has_closed_conjugate &= c.has_closed_conjugate;
      caps_.conjugate_finite &= c.conjugate_finite;
      caps_.conjugate_smooth &= c.conjugate_smooth;
    }
    d_ = off;
  }

  Eigen::Index dimension() const override { return d_; }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "separable_sum"; }

  Scalar value(const Ref& x) const override {
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Scalar v = parts_[i].value(block(x, i));
      if (!is_finite(v)) return plus_infinity<Scalar>();
      total += v;
    }
    return total;
  }
  Vector subgradient(const Ref& x) const override {
    Vector out(d_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
      out.segment(offsets_[i], parts_[i].dimension()) = parts_[i].subgradient(block(x, i));
    return out;
  }
  Vector prox(Scalar lambda, const Ref& x) const override {
    Vector out(d_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
      out.segment(offsets_[i], parts_[i].dimension()) = parts_[i].prox(lambda, block(x, i));
    return out;
  }
  Scalar conjugate_value(const Ref& y) const override {
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Scalar v = parts_[i].conjugate_value(block(y, i));
      if (!is_finite(v)) return plus_infinity<Scalar>();
      total += v;
    }
    return total;
  }
  Vector conjugate_subgradient(const Ref& y) const override {
    Vector out(d_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
      out.segment(offsets_[i], parts_[i].dimension()) =
          parts_[i].conjugate_subgradient(block(y, i));
    return out;
  }

 private:
  Vector block(const Ref& x, std::size_t i) const {
    return x.segment(offsets_[i], parts_[i].dimension());
  }

  std::vector<ConvexFunction<Scalar>> parts_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index d_ = 0;
  Capabilities caps_;
};

/// c * f with c > 0.
template <typename Scalar>
class ScaledTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  ScaledTerm(ConvexFunction<Scalar> base, Scalar c) : base_(std::move(base)), c_(c) {
    require(c_ > Scalar(0), "scale: factor must be > 0");
    caps_ = base_.capabilities();
  }

  Eigen::Index dimension() const override { return base_.dimension(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "scaled(" + base_.name() + ")"; }

  Scalar value(const Ref& x) const override { return c_ * base_.value(x); }
  Vector subgradient(const Ref& x) const override { return c_ * base_.subgradient(x); }
  Vector prox(Scalar lambda, const Ref& x) const override { return base_.prox(lambda * c_, x); }
  Scalar conjugate_value(const Ref& y) const override {
    return c_ * base_.conjugate_value(y / c_);
  }
  Vector conjugate_subgradient(const Ref& y) const override {
    return base_.conjugate_subgradient(y / c_);
  }

 private:
  ConvexFunction<Scalar> base_;
  Scalar c_;
  Capabilities caps_;
};

/// f + (sigma/2)|.|^2. The conjugate is the Moreau-type smoothing of f*,
/// evaluated through the prox of f:
///   (f + sigma/2 |.|^2)*(y) = |y|^2/(2 sigma) - inf_x { f(x) + (sigma/2)|x - y/sigma|^2 }
/// with the infimum attained at prox_{f/sigma}(y/sigma). Finite and smooth
/// for every sigma > 0, which is what makes the epsilon-perturbation a
/// universal regularizer.
template <typename Scalar>
class AddScaledSquaredNormTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  AddScaledSquaredNormTerm(ConvexFunction<Scalar> base, Scalar sigma)
      : base_(std::move(base)), sigma_(sigma) {
    require(sigma_ > Scalar(0), "add_scaled_squared_norm: sigma must be > 0");
    const auto& b = base_.capabilities();
    caps_.smooth = b.smooth;
    caps_.prox_exact = b.prox_exact;
    caps_.has_closed_conjugate = b.prox_exact;
    caps_.conjugate_finite = b.prox_exact;
    caps_.conjugate_smooth = b.prox_exact;
  }

  Eigen::Index dimension() const override { return base_.dimension(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return base_.name() + "+sqnorm"; }

  Scalar value(const Ref& x) const override {
    const Scalar v = base_.value(x);
    if (!is_finite(v)) return plus_infinity<Scalar>();
    return v + Scalar(0.5) * sigma_ * x.squaredNorm();
  }
  Vector subgradient(const Ref& x) const override {
    return base_.subgradient(x) + sigma_ * x;
  }
  Vector prox(Scalar lambda, const Ref& x) const override {
    const Scalar shrink = Scalar(1) + lambda * sigma_;
    return base_.prox(lambda / shrink, x / shrink);
  }
  Scalar conjugate_value(const Ref& y) const override {
    const Vector z = y / sigma_;
    const Vector p = base_.prox(Scalar(1) / sigma_, z);
    const Scalar env = base_.value(p) + Scalar(0.5) * sigma_ * (z - p).squaredNorm();
    return y.squaredNorm() / (Scalar(2) * sigma_) - env;
  }
  Vector conjugate_subgradient(const Ref& y) const override {
    return base_.prox(Scalar(1) / sigma_, y / sigma_);
  }

 private:
  ConvexFunction<Scalar> base_;
  Scalar sigma_;
  Capabilities caps_;
};

/// Moreau envelope f_lambda(x) = inf_z { f(z) + |x-z|^2/(2 lambda) }.
/// Smooth with gradient (x - prox_{lambda f}(x))/lambda; its conjugate is
/// f* + (lambda/2)|.|^2.
template <typename Scalar>
class MoreauEnvelopeTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  MoreauEnvelopeTerm(ConvexFunction<Scalar> base, Scalar lambda)
      : base_(std::move(base)), lambda_(lambda) {
    require(lambda_ > Scalar(0), "moreau_smoothed: lambda must be > 0");
    const auto& b = base_.capabilities();
    caps_.smooth = true;
    caps_.prox_exact = b.prox_exact;
    caps_.has_closed_conjugate = b.has_closed_conjugate;
    caps_.conjugate_finite = b.conjugate_finite;
    caps_.conjugate_smooth = b.conjugate_smooth;
  }

  Eigen::Index dimension() const override { return base_.dimension(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "moreau(" + base_.name() + ")"; }

  Scalar value(const Ref& x) const override {
    const Vector p = base_.prox(lambda_, x);
    return base_.value(p) + (x - p).squaredNorm() / (Scalar(2) * lambda_);
  }
  Vector subgradient(const Ref& x) const override {
    return (x - base_.prox(lambda_, x)) / lambda_;
  }
  Vector prox(Scalar t, const Ref& x) const override {
    // prox_{t f_lambda}(x) = (lambda x + t prox_{(t+lambda) f}(x)) / (t + lambda)
    const Vector p = base_.prox(t + lambda_, x);
    return (lambda_ * x + t * p) / (t + lambda_);
  }
  Scalar conjugate_value(const Ref& y) const override {
    const Scalar v = base_.conjugate_value(y);
    if (!is_finite(v)) return plus_infinity<Scalar>();
    return v + Scalar(0.5) * lambda_ * y.squaredNorm();
  }
  Vector conjugate_subgradient(const Ref& y) const override {
    return base_.conjugate_subgradient(y) + lambda_ * y;
  }

 private:
  ConvexFunction<Scalar> base_;
  Scalar lambda_;
  Capabilities caps_;
};

/// Support function of a set given by its indicator term: value and
/// subgradient come from the indicator's closed-form conjugate, the prox
/// from the Moreau decomposition prox_{l sigma_K}(v) = v - l P_K(v/l).
template <typename Scalar>
class SupportFunctionTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  explicit SupportFunctionTerm(ConvexFunction<Scalar> indicator)
      : indicator_(std::move(indicator)) {
    require(indicator_.capabilities().has_closed_conjugate &&
                indicator_.capabilities().prox_exact,
            "support_function: indicator must have closed conjugate and exact projection");
    caps_.prox_exact = true;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = false;  // the indicator itself
  }

  Eigen::Index dimension() const override { return indicator_.dimension(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "support(" + indicator_.name() + ")"; }

  Scalar value(const Ref& y) const override { return indicator_.conjugate_value(y); }
  Vector subgradient(const Ref& y) const override {
    return indicator_.conjugate_subgradient(y);
  }
  Vector prox(Scalar lambda, const Ref& v) const override {
    return v - lambda * indicator_.prox(Scalar(1), v / lambda);
  }
  Scalar conjugate_value(const Ref& x) const override { return indicator_.value(x); }
  Vector conjugate_subgradient(const Ref& x) const override {
    return indicator_.subgradient(x);
  }

 private:
  ConvexFunction<Scalar> indicator_;
  Capabilities caps_;
};

/// f* as a first-class function: values and subgradients swap roles with
/// the base, and the prox comes from the Moreau decomposition
/// prox_{l f*}(y) = y - l prox_{f/l}(y/l).
template <typename Scalar>
class ConjugateOfTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  explicit ConjugateOfTerm(ConvexFunction<Scalar> base) : base_(std::move(base)) {
    const auto& b = base_.capabilities();
    require(b.has_closed_conjugate,
            "conjugate_function: base must have a closed-form conjugate");
    caps_.smooth = b.conjugate_smooth;
    caps_.prox_exact = b.prox_exact;
    caps_.has_closed_conjugate = true;  // (f*)* = f for proper convex lsc f
    caps_.conjugate_finite = true;      // f itself is proper; refine not needed
    caps_.conjugate_smooth = b.smooth;
  }

  Eigen::Index dimension() const override { return base_.dimension(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "conjugate(" + base_.name() + ")"; }

  Scalar value(const Ref& y) const override { return base_.conjugate_value(y); }
  Vector subgradient(const Ref& y) const override { return base_.conjugate_subgradient(y); }
  Vector prox(Scalar lambda, const Ref& y) const override {
    return y - lambda * base_.prox(Scalar(1) / lambda, y / lambda);
  }
  Scalar conjugate_value(const Ref& x) const override { return base_.value(x); }
  Vector conjugate_subgradient(const Ref& x) const override { return base_.subgradient(x); }

 private:
  ConvexFunction<Scalar> base_;
  Capabilities caps_;
};

/// Adapter carrying a user-supplied (f, f*) pair. Evaluation, subgradient
/// and prox delegate to f; conjugate calls delegate to f*.
template <typename Scalar>
class ConjugatePairTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;

  ConjugatePairTerm(ConvexFunction<Scalar> f, ConvexFunction<Scalar> fstar)
      : f_(std::move(f)), fstar_(std::move(fstar)) {
    require(f_.dimension() == fstar_.dimension(),
            "conjugate_pair: dimension mismatch between f and f*");
    const auto& cf = f_.capabilities();
    const auto& cs = fstar_.capabilities();
    caps_.smooth = cf.smooth;
    caps_.prox_exact = cf.prox_exact;
    caps_.has_closed_conjugate = true;
    caps_.conjugate_finite = true;  // refined below by the validation probe
    caps_.conjugate_smooth = cs.smooth;
  }

  void set_conjugate_finite(bool v) { caps_.conjugate_finite = v; }

  Eigen::Index dimension() const override { return f_.dimension(); }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return "pair(" + f_.name() + ")"; }

  Scalar value(const Ref& x) const override { return f_.value(x); }
  Vector subgradient(const Ref& x) const override { return f_.subgradient(x); }
  Vector prox(Scalar lambda, const Ref& x) const override { return f_.prox(lambda, x); }
  Scalar conjugate_value(const Ref& y) const override { return fstar_.value(y); }
  Vector conjugate_subgradient(const Ref& y) const override {
    return fstar_.subgradient(y);
  }

 private:
  ConvexFunction<Scalar> f_, fstar_;
  Capabilities caps_;
};

/// Black-box function from user callables. Subgradient and prox are
/// optional; the free-function prox falls back to a numeric inner solve.
template <typename Scalar>
class CustomTerm final : public ConvexTerm<Scalar> {
 public:
  using typename ConvexTerm<Scalar>::Vector;
  using typename ConvexTerm<Scalar>::Ref;
  using ValueFn = std::function<Scalar(const Vector&)>;
  using VectorFn = std::function<Vector(const Vector&)>;
  using ProxFn = std::function<Vector(Scalar, const Vector&)>;

  CustomTerm(Eigen::Index d, ValueFn value, VectorFn subgrad, ProxFn prox_fn,
             Capabilities caps, std::string label)
      : d_(d),
        value_(std::move(value)),
        subgrad_(std::move(subgrad)),
        prox_(std::move(prox_fn)),
        caps_(caps),
        label_(std::move(label)) {
    require(static_cast<bool>(value_), "custom: value callable required");
    caps_.has_closed_conjugate = false;
    caps_.prox_exact = static_cast<bool>(prox_);
  }

  Eigen::Index dimension() const override { return d_; }
  const Capabilities& caps() const override { return caps_; }
  std::string name() const override { return label_; }

  Scalar value(const Ref& x) const override { return value_(x); }
  Vector subgradient(const Ref& x) const override {
    require(static_cast<bool>(subgrad_), label_ + ": no subgradient callable");
    return subgrad_(x);
  }
  Vector prox(Scalar lambda, const Ref& x) const override {
    require(static_cast<bool>(prox_), label_ + ": no exact prox; use sdflow::prox()");
    return prox_(lambda, x);
  }

 private:
  Eigen::Index d_;
  ValueFn value_;
  VectorFn subgrad_;
  ProxFn prox_;
  Capabilities caps_;
  std::string label_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

template <typename Scalar>
ConvexFunction<Scalar> zero_function(Eigen::Index d) {
  return ConvexFunction<Scalar>(std::make_shared<detail::ZeroTerm<Scalar>>(d));
}

template <typename Scalar>
ConvexFunction<Scalar> scaled_squared_norm(Scalar sigma, Eigen::Index d) {
  return ConvexFunction<Scalar>(std::make_shared<detail::ScaledSquaredNormTerm<Scalar>>(sigma, d));
}

template <typename DA, typename DB>
ConvexFunction<typename DA::Scalar> quadratic(const Eigen::MatrixBase<DA>& A,
                                              const Eigen::MatrixBase<DB>& b,
                                              typename DA::Scalar c = typename DA::Scalar(0)) {
  using Scalar = typename DA::Scalar;
  auto core = std::make_shared<const detail::QuadraticCore<Scalar>>(MatrixX<Scalar>(A));
  return ConvexFunction<Scalar>(
      std::make_shared<detail::QuadraticTerm<Scalar>>(std::move(core), VectorX<Scalar>(b), c));
}

/// Family of quadratics sharing one classified matrix A; sampling a member
/// with a new drift is allocation-light. Intended for potentials of the
/// form (1/2) x^T A x + <b(t), x> + c(t).
template <typename Scalar = double>
class QuadraticFamily {
 public:
  template <typename Derived>
  explicit QuadraticFamily(const Eigen::MatrixBase<Derived>& A)
      : core_(std::make_shared<const detail::QuadraticCore<Scalar>>(MatrixX<Scalar>(A))) {}

  ConvexFunction<Scalar> operator()(VectorX<Scalar> b, Scalar c = Scalar(0)) const {
    return ConvexFunction<Scalar>(
        std::make_shared<detail::QuadraticTerm<Scalar>>(core_, std::move(b), c));
  }
  Eigen::Index dimension() const { return core_->A.rows(); }

 private:
  std::shared_ptr<const detail::QuadraticCore<Scalar>> core_;
};

/// 1-D convenience: f(x) = (a/2) x^2 + b x + c.
template <typename Scalar>
ConvexFunction<Scalar> quadratic_1d(Scalar a, Scalar b, Scalar c = Scalar(0)) {
  MatrixX<Scalar> A(1, 1);
  A(0, 0) = a;
  VectorX<Scalar> bv(1);
  bv[0] = b;
  return quadratic(A, bv, c);
}

template <typename Derived>
ConvexFunction<typename Derived::Scalar> linear_function(
    const Eigen::MatrixBase<Derived>& b, typename Derived::Scalar c = typename Derived::Scalar(0)) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = b.size();
  return quadratic(MatrixX<Scalar>::Zero(d, d), b, c);
}

template <typename Derived>
ConvexFunction<typename Derived::Scalar> indicator_point(const Eigen::MatrixBase<Derived>& anchor) {
  using Scalar = typename Derived::Scalar;
  return ConvexFunction<Scalar>(
      std::make_shared<detail::IndicatorPointTerm<Scalar>>(VectorX<Scalar>(anchor)));
}

template <typename DL, typename DH>
ConvexFunction<typename DL::Scalar> indicator_box(const Eigen::MatrixBase<DL>& lo,
                                                  const Eigen::MatrixBase<DH>& hi) {
  using Scalar = typename DL::Scalar;
  return ConvexFunction<Scalar>(std::make_shared<detail::IndicatorBoxTerm<Scalar>>(
      VectorX<Scalar>(lo), VectorX<Scalar>(hi)));
}

template <typename Derived>
ConvexFunction<typename Derived::Scalar> indicator_ball(const Eigen::MatrixBase<Derived>& center,
                                                        typename Derived::Scalar radius) {
  using Scalar = typename Derived::Scalar;
  return ConvexFunction<Scalar>(
      std::make_shared<detail::IndicatorBallTerm<Scalar>>(VectorX<Scalar>(center), radius));
}

template <typename DC, typename DR>
ConvexFunction<typename DC::Scalar> indicator_affine(const Eigen::MatrixBase<DC>& C,
                                                     const Eigen::MatrixBase<DR>& rhs) {
  using Scalar = typename DC::Scalar;
  return ConvexFunction<Scalar>(std::make_shared<detail::IndicatorAffineTerm<Scalar>>(
      MatrixX<Scalar>(C), VectorX<Scalar>(rhs)));
}

template <typename Scalar>
ConvexFunction<Scalar> scaled_l1(Scalar s, Eigen::Index d) {
  return ConvexFunction<Scalar>(std::make_shared<detail::ScaledL1Term<Scalar>>(s, d));
}

template <typename Scalar>
ConvexFunction<Scalar> separable_sum(std::vector<ConvexFunction<Scalar>> parts) {
  return ConvexFunction<Scalar>(
      std::make_shared<detail::SeparableSumTerm<Scalar>>(std::move(parts)));
}

template <typename Scalar>
ConvexFunction<Scalar> scale(ConvexFunction<Scalar> f, Scalar c) {
  return ConvexFunction<Scalar>(std::make_shared<detail::ScaledTerm<Scalar>>(std::move(f), c));
}

template <typename Scalar>
ConvexFunction<Scalar> add_scaled_squared_norm(ConvexFunction<Scalar> f, Scalar sigma) {
  return ConvexFunction<Scalar>(
      std::make_shared<detail::AddScaledSquaredNormTerm<Scalar>>(std::move(f), sigma));
}

template <typename Scalar>
ConvexFunction<Scalar> moreau_smoothed(ConvexFunction<Scalar> f, Scalar lambda) {
  return ConvexFunction<Scalar>(
      std::make_shared<detail::MoreauEnvelopeTerm<Scalar>>(std::move(f), lambda));
}

template <typename Scalar>
ConvexFunction<Scalar> support_function(ConvexFunction<Scalar> indicator) {
  return ConvexFunction<Scalar>(
      std::make_shared<detail::SupportFunctionTerm<Scalar>>(std::move(indicator)));
}

/// The conjugate f* as a ConvexFunction (requires a closed-form conjugate
/// and, for its prox, an exact prox of f).
template <typename Scalar>
ConvexFunction<Scalar> conjugate_function(ConvexFunction<Scalar> f) {
  return ConvexFunction<Scalar>(
      std::make_shared<detail::ConjugateOfTerm<Scalar>>(std::move(f)));
}

template <typename Scalar>
ConvexFunction<Scalar> custom_function(
    Eigen::Index d, typename detail::CustomTerm<Scalar>::ValueFn value,
    typename detail::CustomTerm<Scalar>::VectorFn subgrad = nullptr,
    std::function<VectorX<Scalar>(Scalar, const VectorX<Scalar>&)> prox_fn = nullptr,
    Capabilities caps = {}, std::string label = "custom") {
  return ConvexFunction<Scalar>(std::make_shared<detail::CustomTerm<Scalar>>(
      d, std::move(value), std::move(subgrad), std::move(prox_fn), caps, std::move(label)));
}

/// Validates that (f, f*) is a genuine conjugate pair by Fenchel-Young
/// equality at prox-generated points: with p = prox_{lf}(x) and
/// y = (x-p)/l in the subdifferential of f at p, the probe
/// f(p) + f*(y) - <p,y> must vanish. Returns the worst probe residual.
template <typename Scalar>
Scalar conjugate_pair_probe(const ConvexFunction<Scalar>& f, const ConvexFunction<Scalar>& fstar,
                            int trials = 32, unsigned seed = 20081u) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = f.dimension();
  Scalar worst = Scalar(0);
  const Scalar lambdas[] = {Scalar(0.25), Scalar(1), Scalar(4)};
  for (int t = 0; t < trials; ++t) {
    VectorX<Scalar> x(d);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = Scalar(2.0 * normal(rng));
    const Scalar l = lambdas[t % 3];
    const VectorX<Scalar> p = f.prox(l, x);
    const VectorX<Scalar> y = (x - p) / l;
    const Scalar fp = f.value(p);
    const Scalar fsy = fstar.value(y);
    if (!is_finite(fp) || !is_finite(fsy)) return plus_infinity<Scalar>();
    worst = std::max(worst, std::abs(fp + fsy - p.dot(y)));
  }
  return worst;
}

/// User-supplied (f, f*) pair, validated by random Fenchel-Young equality
/// probes at prox points. Throws contract_violation when the pair fails.
template <typename Scalar>
ConvexFunction<Scalar> conjugate_pair(ConvexFunction<Scalar> f, ConvexFunction<Scalar> fstar,
                                      Scalar probe_tol = Scalar(1e-8)) {
  const Scalar worst = conjugate_pair_probe(f, fstar);
  require(is_finite(worst) && worst <= probe_tol,
          "conjugate_pair: Fenchel-Young equality probe failed (worst residual " +
              std::to_string(static_cast<double>(worst)) + ")");
  auto term = std::make_shared<detail::ConjugatePairTerm<Scalar>>(std::move(f), std::move(fstar));
  return ConvexFunction<Scalar>(std::move(term));
}

// ---------------------------------------------------------------------------
// Time-dependent potentials and growth bounds
// ---------------------------------------------------------------------------

/// phi(t, .) for t in [0, T]: a sampler of ConvexFunctions of fixed
/// dimension. Immutable and pure; samplers must be thread-safe.
template <typename Scalar = double>
class TimeConvexFunction {
 public:
  using Sampler = std::function<ConvexFunction<Scalar>(Scalar)>;

  TimeConvexFunction() = default;
  TimeConvexFunction(Scalar horizon, Eigen::Index dim, Sampler sampler)
      : horizon_(horizon), dim_(dim), sampler_(std::move(sampler)) {
    require(horizon_ > Scalar(0), "TimeConvexFunction: horizon must be > 0");
    require(static_cast<bool>(sampler_), "TimeConvexFunction: sampler required");
  }

  static TimeConvexFunction constant(Scalar horizon, ConvexFunction<Scalar> f) {
    const Eigen::Index d = f.dimension();
    return TimeConvexFunction(horizon, d, [f = std::move(f)](Scalar) { return f; });
  }

  bool valid() const { return static_cast<bool>(sampler_); }
  Scalar horizon() const { return horizon_; }
  Eigen::Index dimension() const { return dim_; }

  ConvexFunction<Scalar> at(Scalar t) const {
    require(t >= -Scalar(1e-12) && t <= horizon_ * (Scalar(1) + Scalar(1e-12)),
            "TimeConvexFunction: t outside [0, T]");
    ConvexFunction<Scalar> f = sampler_(t);
    require(f.dimension() == dim_, "TimeConvexFunction: sampler changed dimension");
    return f;
  }

 private:
  Scalar horizon_ = Scalar(0);
  Eigen::Index dim_ = 0;
  Sampler sampler_;
};

using TimeConvexFunctiond = TimeConvexFunction<double>;

/// Properness probe: every sampled t must admit at least one x with finite
/// value. Returns false as soon as one sampled slice looks improper.
template <typename Scalar>
bool sampled_properness(const TimeConvexFunction<Scalar>& phi, int time_samples = 16,
                        int space_samples = 64, unsigned seed = 7u) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k <= time_samples; ++k) {
    const Scalar t = phi.horizon() * Scalar(k) / Scalar(time_samples);
    const ConvexFunction<Scalar> f = phi.at(t);
    // The prox at the origin lands in the domain whenever f is proper.
    VectorX<Scalar> p = f.prox(Scalar(1), VectorX<Scalar>::Zero(f.dimension()));
    bool ok = is_finite(f.value(p));
    for (int s = 0; !ok && s < space_samples; ++s) {
      VectorX<Scalar> x(f.dimension());
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = Scalar(3.0 * normal(rng));
      ok = is_finite(f.value(x));
    }
    if (!ok) return false;
  }
  return true;
}

/// Growth data for condition (B1)-style checks:
///   -alpha_bar <= phi(t,u) <= (beta/2)|u|^2 + gamma_bar.
template <typename Scalar = double>
struct GrowthBounds {
  Scalar beta = Scalar(0);
  Scalar alpha_bar = Scalar(0);
  Scalar gamma_bar = Scalar(0);
};

using GrowthBoundsd = GrowthBounds<double>;

/// Largest sampled violation of the declared growth bounds (0 when all
/// sampled points satisfy them).
template <typename Scalar>
Scalar growth_violation(const TimeConvexFunction<Scalar>& phi, const GrowthBounds<Scalar>& gb,
                        int trials = 200, unsigned seed = 11u) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  Scalar worst = Scalar(0);
  for (int k = 0; k < trials; ++k) {
    const Scalar t = phi.horizon() * Scalar(ut(rng));
    const ConvexFunction<Scalar> f = phi.at(t);
    VectorX<Scalar> u(f.dimension());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = Scalar(normal(rng));
    const Scalar v = f.value(u);
    if (!is_finite(v)) continue;  // +inf slices fall outside the (B1) class anyway
    worst = std::max(worst, -gb.alpha_bar - v);
    worst = std::max(worst, v - (gb.beta / Scalar(2)) * u.squaredNorm() - gb.gamma_bar);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Module operations
// ---------------------------------------------------------------------------

template <typename Scalar, typename Derived>
VectorX<Scalar> prox(const ConvexFunction<Scalar>& f, Scalar lambda,
                     const Eigen::MatrixBase<Derived>& x);

/// Moreau envelope value inf_y { f(y) + |x-y|^2/(2 lambda) }. Always finite
/// for proper f, and never exceeds f(x).
template <typename Scalar, typename Derived>
Scalar moreau_envelope(const ConvexFunction<Scalar>& f, Scalar lambda,
                       const Eigen::MatrixBase<Derived>& x) {
  require(lambda > Scalar(0), "moreau_envelope: lambda must be > 0");
  const VectorX<Scalar> p = prox(f, lambda, x);
  const Scalar fp = f.value(p);
  if (!is_finite(fp))
    throw numeric_error("moreau_envelope: prox point has infinite value (improper f?)",
                        static_cast<double>(fp));
  return fp + (x - p).squaredNorm() / (Scalar(2) * lambda);
}

/// phi_eps(t,u) = phi(t,u) + (eps/2)|u|^2. The result has a finite, smooth
/// conjugate everywhere.
template <typename Scalar>
TimeConvexFunction<Scalar> epsilon_perturb(const TimeConvexFunction<Scalar>& phi, Scalar eps) {
  require(eps > Scalar(0), "epsilon_perturb: eps must be > 0");
  return TimeConvexFunction<Scalar>(
      phi.horizon(), phi.dimension(),
      [phi, eps](Scalar t) { return add_scaled_squared_norm(phi.at(t), eps); });
}

/// Hamiltonian of the basic pair L(t,x,p) = phi(t,x) + phi*(t,-p):
/// the sup over p collapses to H_L(t,x,y) = phi(t,-y) - phi(t,x).
/// Returns -inf when x lies outside the domain of phi(t,.).
template <typename Scalar, typename DX, typename DY>
Scalar hamiltonian_of_lagrangian(const TimeConvexFunction<Scalar>& phi, Scalar t,
                                 const Eigen::MatrixBase<DX>& x,
                                 const Eigen::MatrixBase<DY>& y) {
  const ConvexFunction<Scalar> f = phi.at(t);
  const Scalar fx = f.value(x);
  if (!is_finite(fx)) return -plus_infinity<Scalar>();
  return f.value(VectorX<Scalar>(-y)) - fx;
}

}  // namespace sdflow
