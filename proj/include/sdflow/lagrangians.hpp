#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdflow/conjugate.hpp"
#include "sdflow/convex.hpp"
#include "sdflow/core.hpp"
#include "sdflow/paths.hpp"

namespace sdflow {

// ---------------------------------------------------------------------------
// Boundary conditions: a conjugate pair (psi, psi*) plus a kind tag.
// ---------------------------------------------------------------------------

enum class BoundaryKind {
  InitialValue,
  Periodic,
  AntiPeriodic,
  SkewPeriodicQuadratic,
  ConvexSetGap,
  Custom,
};

inline const char* to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::InitialValue: return "initial_value";
    case BoundaryKind::Periodic: return "periodic";
    case BoundaryKind::AntiPeriodic: return "anti_periodic";
    case BoundaryKind::SkewPeriodicQuadratic: return "skew_periodic";
    case BoundaryKind::ConvexSetGap: return "convex_set_gap";
    case BoundaryKind::Custom: return "custom";
  }
  return "?";
}

template <typename Scalar = double>
struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::Custom;
  ConvexFunction<Scalar> psi;
  ConvexFunction<Scalar> psi_star;
  // InitialValue: the prescribed x0. ConvexSetGap over a point: the gap.
  VectorX<Scalar> anchor;

  Eigen::Index dimension() const { return psi.dimension(); }
};

using BoundaryConditiond = BoundaryCondition<double>;

namespace detail {

// psi bounded below <=> psi*(0) finite; condition (A3)/(B3) style check.
template <typename Scalar>
void check_boundary_admissible(const BoundaryCondition<Scalar>& bc) {
  require(is_finite(bc.psi.value(VectorX<Scalar>::Zero(bc.dimension()))),
          "boundary: 0 must lie in the domain of psi");
  require(is_finite(bc.psi_star.value(VectorX<Scalar>::Zero(bc.dimension()))),
          "boundary: psi must be bounded from below (psi*(0) finite)");
}

}  // namespace detail

/// psi(x) = |x|^2/4 - <x, x0>, whose conjugate is |y + x0|^2; the
/// variational boundary relation pins x(0) = x0.
template <typename Derived>
BoundaryCondition<typename Derived::Scalar> initial_value_boundary(
    const Eigen::MatrixBase<Derived>& x0_expr) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> x0 = x0_expr;
  const Eigen::Index d = x0.size();
  BoundaryCondition<Scalar> bc;
  bc.kind = BoundaryKind::InitialValue;
  bc.anchor = x0;
  bc.psi = quadratic(MatrixX<Scalar>(Scalar(0.5) * MatrixX<Scalar>::Identity(d, d)),
                     VectorX<Scalar>(-x0));
  bc.psi_star = quadratic(MatrixX<Scalar>(Scalar(2) * MatrixX<Scalar>::Identity(d, d)),
                          VectorX<Scalar>(Scalar(2) * x0), x0.squaredNorm());
  detail::check_boundary_admissible(bc);
  return bc;
}

/// psi = indicator of {0} on the endpoint gap, psi* = 0: pins x(0) = x(T).
template <typename Scalar>
BoundaryCondition<Scalar> periodic_boundary(Eigen::Index d) {
  BoundaryCondition<Scalar> bc;
  bc.kind = BoundaryKind::Periodic;
  bc.anchor = VectorX<Scalar>::Zero(d);
  bc.psi = indicator_point(VectorX<Scalar>::Zero(d));
  bc.psi_star = zero_function<Scalar>(d);
  return bc;
}

/// psi = 0, psi* = indicator of {0} on the endpoint mean: x(0) = -x(T).
template <typename Scalar>
BoundaryCondition<Scalar> antiperiodic_boundary(Eigen::Index d) {
  BoundaryCondition<Scalar> bc;
  bc.kind = BoundaryKind::AntiPeriodic;
  bc.anchor = VectorX<Scalar>::Zero(d);
  bc.psi = zero_function<Scalar>(d);
  bc.psi_star = indicator_point(VectorX<Scalar>::Zero(d));
  return bc;
}

/// psi = psi* = |x|^2/2, self-conjugate; with the J2 functional this pins
/// x(0) = J x(T).
template <typename Scalar>
BoundaryCondition<Scalar> skew_periodic_boundary(Eigen::Index d) {
  BoundaryCondition<Scalar> bc;
  bc.kind = BoundaryKind::SkewPeriodicQuadratic;
  bc.anchor = VectorX<Scalar>::Zero(d);
  bc.psi = scaled_squared_norm<Scalar>(Scalar(1), d);
  bc.psi_star = bc.psi;
  return bc;
}

/// Endpoint gap constrained to a convex set: x(0) - x(T) in K. Supported K:
/// point, box, ball, affine subspace (closed-form support functions).
template <typename Scalar>
BoundaryCondition<Scalar> convex_set_gap_boundary(ConvexFunction<Scalar> K_indicator) {
  const std::string n = K_indicator.name();
  require(n == "indicator_point" || n == "indicator_box" || n == "indicator_ball" ||
              n == "indicator_affine",
          "convex_set_gap: unsupported set '" + n +
              "'; supported: indicator_point, indicator_box, indicator_ball, indicator_affine");
  BoundaryCondition<Scalar> bc;
  bc.kind = BoundaryKind::ConvexSetGap;
  if (n == "indicator_point")
    bc.anchor = K_indicator.prox(Scalar(1), VectorX<Scalar>::Zero(K_indicator.dimension()));
  bc.psi = K_indicator;
  bc.psi_star = support_function(std::move(K_indicator));
  detail::check_boundary_admissible(bc);  // needs 0 in K and the support finite at 0
  return bc;
}

/// User-supplied pair, validated by Fenchel-Young equality probes at
/// prox-generated points.
template <typename Scalar>
BoundaryCondition<Scalar> custom_boundary(ConvexFunction<Scalar> psi,
                                          ConvexFunction<Scalar> psi_star,
                                          Scalar probe_tol = Scalar(1e-8)) {
  require(psi.dimension() == psi_star.dimension(), "custom_boundary: dimension mismatch");
  const Scalar worst = conjugate_pair_probe(psi, psi_star);
  require(is_finite(worst) && worst <= probe_tol,
          "custom_boundary: (psi, psi*) failed the Fenchel-Young equality probe (worst " +
              std::to_string(static_cast<double>(worst)) + ")");
  BoundaryCondition<Scalar> bc;
  bc.kind = BoundaryKind::Custom;
  bc.anchor = VectorX<Scalar>::Zero(psi.dimension());
  bc.psi = std::move(psi);
  bc.psi_star = std::move(psi_star);
  detail::check_boundary_admissible(bc);
  return bc;
}

/// G(a,b) = psi(a) + psi*(-b), the boundary Lagrangian of the pair.
template <typename Scalar, typename DA, typename DB>
Scalar boundary_lagrangian(const BoundaryCondition<Scalar>& bc, const Eigen::MatrixBase<DA>& a,
                           const Eigen::MatrixBase<DB>& b) {
  const Scalar va = bc.psi.value(a);
  const Scalar vb = bc.psi_star.value(VectorX<Scalar>(-b));
  return (is_finite(va) && is_finite(vb)) ? va + vb : plus_infinity<Scalar>();
}

/// Lambda-regularization at the pair level: (psi_l, psi*_l) with
/// psi_l the Moreau envelope of psi and psi*_l = psi* + (l/2)|.|^2;
/// a genuine conjugate pair again.
template <typename Scalar>
BoundaryCondition<Scalar> lambda_regularize(const BoundaryCondition<Scalar>& bc, Scalar lambda) {
  require(lambda > Scalar(0), "lambda_regularize: lambda must be > 0");
  BoundaryCondition<Scalar> out;
  out.kind = BoundaryKind::Custom;
  out.anchor = bc.anchor;
  out.psi = moreau_smoothed(bc.psi, lambda);
  out.psi_star = add_scaled_squared_norm(bc.psi_star, lambda);
  return out;
}

/// Epsilon-perturbation of the pair: (psi + eps/2 |.|^2, Moreau_eps(psi*));
/// the dual-side analogue of lambda_regularize.
template <typename Scalar>
BoundaryCondition<Scalar> epsilon_perturb_boundary(const BoundaryCondition<Scalar>& bc,
                                                   Scalar eps) {
  require(eps > Scalar(0), "epsilon_perturb_boundary: eps must be > 0");
  BoundaryCondition<Scalar> out;
  out.kind = BoundaryKind::Custom;
  out.anchor = bc.anchor;
  out.psi = add_scaled_squared_norm(bc.psi, eps);
  out.psi_star = moreau_smoothed(bc.psi_star, eps);
  return out;
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

enum class FlowKind { GradientFlow, HamiltonianJ1, HamiltonianJ2 };

inline const char* to_string(FlowKind k) {
  switch (k) {
    case FlowKind::GradientFlow: return "gradient_flow";
    case FlowKind::HamiltonianJ1: return "hamiltonian_j1";
    case FlowKind::HamiltonianJ2: return "hamiltonian_j2";
  }
  return "?";
}

template <typename Scalar>
Scalar resonance_limit(Scalar T) {
  return Scalar(EIGEN_PI) / (Scalar(2) * T);
}

/// A fully specified instance: flow kind, potential, boundary pair, grid,
/// declared growth bounds (required for Hamiltonian kinds, where the
/// variational principle needs beta < pi/(2T); instances violating that
/// window are still constructible -- the guard downgrades them to a
/// warning so non-attainment can be observed honestly).
template <typename Scalar = double>
struct Problem {
  FlowKind kind = FlowKind::GradientFlow;
  TimeConvexFunction<Scalar> phi;
  BoundaryCondition<Scalar> boundary;
  PathGrid<Scalar> grid;
  std::optional<GrowthBounds<Scalar>> growth;
};

using Problemd = Problem<double>;

template <typename Scalar>
void validate(const Problem<Scalar>& prob) {
  require(prob.phi.valid(), "Problem: potential not set");
  require(prob.phi.dimension() == prob.grid.d, "Problem: potential dimension != grid dimension");
  require(prob.boundary.dimension() == prob.grid.d,
          "Problem: boundary dimension != grid dimension");
  require(std::abs(prob.phi.horizon() - prob.grid.T) <=
              Scalar(1e-12) * std::max(Scalar(1), prob.grid.T),
          "Problem: potential horizon != grid horizon");
  const auto caps = prob.phi.at(Scalar(0)).capabilities();
  require(caps.has_closed_conjugate || caps.prox_exact || prob.grid.d <= 3,
          "Problem: potential needs conjugate capability (closed form, exact prox for "
          "epsilon-perturbation, or d <= 3 for the grid path)");
  if (prob.kind != FlowKind::GradientFlow) {
    require(prob.grid.d % 2 == 0, "Problem: Hamiltonian kinds need even dimension");
    require(prob.growth.has_value(), "Problem: Hamiltonian kinds need declared growth bounds");
  }
}

template <typename Scalar>
Problem<Scalar> gradient_flow_problem(TimeConvexFunction<Scalar> phi,
                                      BoundaryCondition<Scalar> boundary, PathGrid<Scalar> grid,
                                      std::optional<GrowthBounds<Scalar>> growth = {}) {
  Problem<Scalar> prob{FlowKind::GradientFlow, std::move(phi), std::move(boundary), grid,
                       growth};
  validate(prob);
  return prob;
}

template <typename Scalar>
Problem<Scalar> hamiltonian_problem(FlowKind kind, TimeConvexFunction<Scalar> phi,
                                    BoundaryCondition<Scalar> boundary, PathGrid<Scalar> grid,
                                    GrowthBounds<Scalar> growth) {
  require(kind == FlowKind::HamiltonianJ1 || kind == FlowKind::HamiltonianJ2,
          "hamiltonian_problem: kind must be J1 or J2");
  Problem<Scalar> prob{kind, std::move(phi), std::move(boundary), grid, growth};
  validate(prob);
  return prob;
}

// ---------------------------------------------------------------------------
// Functional evaluation (residual-first)
// ---------------------------------------------------------------------------

/// The functional VALUE is assembled as h * sum(r_i) + r_b, never term by
/// term, so nonnegativity is structural and the certificate gap is free of
/// cancellation. r_i and r_b are the pointwise Fenchel-Young slacks.
template <typename Scalar = double>
struct FunctionalBreakdown {
  Scalar value = Scalar(0);
  VectorX<Scalar> interval_residuals;
  Scalar boundary_residual = Scalar(0);

  bool finite() const { return is_finite(value); }
};

using FunctionalBreakdownd = FunctionalBreakdown<double>;

namespace detail {

/// Shared evaluator. With `boundary_psi_terms = false` only the smooth
/// pairing part of the boundary enters (the splitting methods prox the
/// psi terms separately); in that mode boundary_residual holds just the
/// pairing value. When `grad` is non-null it receives d(value)/d(nodes);
/// gradients are only filled while the value stays finite.
template <typename Scalar>
FunctionalBreakdown<Scalar> evaluate_impl(const Problem<Scalar>& prob, const Path<Scalar>& p,
                                          bool boundary_psi_terms, MatrixX<Scalar>* grad) {
  using Vector = VectorX<Scalar>;
  require(p.grid == prob.grid, "evaluate: path grid does not match the problem grid");
  const int N = prob.grid.N;
  const Eigen::Index d = prob.grid.d;
  const Scalar h = prob.grid.h();
  const bool ham = prob.kind != FlowKind::GradientFlow;
  if (ham) require(d % 2 == 0, "evaluate: Hamiltonian kinds need even dimension");
  const bool need_grad = grad != nullptr;
  if (need_grad) {
    grad->resize(d, N + 1);
    grad->setZero();
  }

  FunctionalBreakdown<Scalar> out;
  out.interval_residuals.resize(N);

  bool infinite = false;
  Scalar residual_sum = Scalar(0);
  for (int i = 0; i < N; ++i) {
    const Vector m = Scalar(0.5) * (p.nodes.col(i) + p.nodes.col(i + 1));
    const Vector v = (p.nodes.col(i + 1) - p.nodes.col(i)) / h;
    const ConvexFunction<Scalar> f = prob.phi.at(prob.grid.midpoint_time(i));
    const Vector w = ham ? apply_J(v) : v;

    const Scalar fm = f.value(m);
    Scalar fs;
    if (f.capabilities().has_closed_conjugate) {
      fs = f.conjugate_value(-w);
    } else {
      require(!need_grad, "evaluate: gradient path needs a closed-form conjugate "
                          "(epsilon-perturb the potential)");
      fs = conjugate(f, Vector(-w));
    }
    const Scalar r = (is_finite(fm) && is_finite(fs)) ? fm + fs + w.dot(m)
                                                      : plus_infinity<Scalar>();
    out.interval_residuals[i] = r;
    if (!is_finite(r)) {
      infinite = true;
      continue;
    }
    residual_sum += r;

    if (need_grad && !infinite) {
      const Vector gm = f.subgradient(m) + w;
      Vector gv;
      if (ham) {
        gv = apply_J(Vector(f.conjugate_subgradient(-w) - m));
      } else {
        gv = m - f.conjugate_subgradient(-w);
      }
      grad->col(i) += (h / Scalar(2)) * gm - gv;
      grad->col(i + 1) += (h / Scalar(2)) * gm + gv;
    }
  }

  const Vector x0 = p.nodes.col(0);
  const Vector xN = p.nodes.col(N);
  Scalar rb = Scalar(0);

  switch (prob.kind) {
    case FlowKind::GradientFlow: {
      const Vector a = x0 - xN;
      const Vector b = Scalar(0.5) * (x0 + xN);
      if (boundary_psi_terms) {
        const Scalar va = prob.boundary.psi.value(a);
        const Scalar vb = prob.boundary.psi_star.value(-b);
        rb = (is_finite(va) && is_finite(vb)) ? va + vb + a.dot(b) : plus_infinity<Scalar>();
        if (need_grad && is_finite(rb) && !infinite) {
          const Vector da = prob.boundary.psi.subgradient(a) + b;
          const Vector db = a - prob.boundary.psi_star.subgradient(-b);
          grad->col(0) += da + Scalar(0.5) * db;
          grad->col(N) += -da + Scalar(0.5) * db;
        }
      } else {
        rb = a.dot(b);
        if (need_grad && !infinite) {
          grad->col(0) += x0;
          grad->col(N) += -xN;
        }
      }
      break;
    }
    case FlowKind::HamiltonianJ1: {
      const Vector a = xN - x0;
      const Vector b = Scalar(0.5) * (x0 + xN);
      const Vector Jb = apply_J(b);
      if (boundary_psi_terms) {
        const Scalar va = prob.boundary.psi.value(a);
        const Scalar vb = prob.boundary.psi_star.value(-Jb);
        rb = (is_finite(va) && is_finite(vb)) ? va + vb + a.dot(Jb) : plus_infinity<Scalar>();
        if (need_grad && is_finite(rb) && !infinite) {
          const Vector da = prob.boundary.psi.subgradient(a) + Jb;
          const Vector db =
              apply_J(Vector(prob.boundary.psi_star.subgradient(-Jb) - a));
          grad->col(0) += -da + Scalar(0.5) * db;
          grad->col(N) += da + Scalar(0.5) * db;
        }
      } else {
        rb = a.dot(Jb);
        if (need_grad && !infinite) {
          const Vector da = Jb;
          const Vector db = apply_J(Vector(-a));
          grad->col(0) += -da + Scalar(0.5) * db;
          grad->col(N) += da + Scalar(0.5) * db;
        }
      }
      break;
    }
    case FlowKind::HamiltonianJ2: {
      const Vector JxN = apply_J(xN);
      if (boundary_psi_terms) {
        const Scalar va = prob.boundary.psi.value(x0);
        const Scalar vb = prob.boundary.psi_star.value(JxN);
        rb = (is_finite(va) && is_finite(vb)) ? va + vb - x0.dot(JxN) : plus_infinity<Scalar>();
        if (need_grad && is_finite(rb) && !infinite) {
          grad->col(0) += prob.boundary.psi.subgradient(x0) - JxN;
          grad->col(N) +=
              apply_J(Vector(x0 - prob.boundary.psi_star.subgradient(JxN)));
        }
      } else {
        rb = -x0.dot(JxN);
        if (need_grad && !infinite) {
          grad->col(0) += -JxN;
          grad->col(N) += apply_J(x0);
        }
      }
      break;
    }
  }

  out.boundary_residual = rb;
  out.value = (infinite || !is_finite(rb)) ? plus_infinity<Scalar>() : h * residual_sum + rb;
  return out;
}

}  // namespace detail

/// I(p) = sum_i h [phi(t_mid, m_i) + phi*(t_mid, -v_i)] + psi(a) + psi*(-b)
/// with a = x_0 - x_N and b = (x_0 + x_N)/2, evaluated as the exact
/// residual decomposition sum_i h r_i + r_b.
template <typename Scalar>
FunctionalBreakdown<Scalar> gradient_flow_functional(const Problem<Scalar>& prob,
                                                     const Path<Scalar>& p) {
  require(prob.kind == FlowKind::GradientFlow, "gradient_flow_functional: wrong problem kind");
  return detail::evaluate_impl(prob, p, true, static_cast<MatrixX<Scalar>*>(nullptr));
}

/// J1(p): interior residuals r_i = phi(m) + phi*(-J v) + <J v, m>, boundary
/// residual psi(x_N - x_0) + psi*(-J b) + <x_N - x_0, J b>.
template <typename Scalar>
FunctionalBreakdown<Scalar> hamiltonian_j1(const Problem<Scalar>& prob, const Path<Scalar>& p) {
  require(prob.kind == FlowKind::HamiltonianJ1, "hamiltonian_j1: wrong problem kind");
  return detail::evaluate_impl(prob, p, true, static_cast<MatrixX<Scalar>*>(nullptr));
}

/// J2(p): same interior, boundary residual psi(x_0) + psi*(J x_N) -
/// <x_0, J x_N> (the pairing identity <J b, x_N - x_0> = <J x_0, x_N>
/// folds the cross term into the endpoints).
template <typename Scalar>
FunctionalBreakdown<Scalar> hamiltonian_j2(const Problem<Scalar>& prob, const Path<Scalar>& p) {
  require(prob.kind == FlowKind::HamiltonianJ2, "hamiltonian_j2: wrong problem kind");
  return detail::evaluate_impl(prob, p, true, static_cast<MatrixX<Scalar>*>(nullptr));
}

/// Kind dispatcher.
template <typename Scalar>
FunctionalBreakdown<Scalar> evaluate_functional(const Problem<Scalar>& prob,
                                                const Path<Scalar>& p) {
  return detail::evaluate_impl(prob, p, true, static_cast<MatrixX<Scalar>*>(nullptr));
}

/// Value + gradient with respect to the node matrix (solver entry point).
template <typename Scalar>
FunctionalBreakdown<Scalar> evaluate_with_gradient(const Problem<Scalar>& prob,
                                                   const Path<Scalar>& p,
                                                   MatrixX<Scalar>& grad) {
  return detail::evaluate_impl(prob, p, true, &grad);
}

/// Smooth part for splitting methods: interval residuals plus the boundary
/// pairing, psi terms excluded.
template <typename Scalar>
FunctionalBreakdown<Scalar> evaluate_smooth_part(const Problem<Scalar>& prob,
                                                 const Path<Scalar>& p,
                                                 MatrixX<Scalar>* grad = nullptr) {
  return detail::evaluate_impl(prob, p, false, grad);
}

/// Exact prox of the nonsmooth boundary block in the endpoint variables:
/// the change to gap/mean coordinates is a scaled isometry, so the prox
/// separates into one prox of psi and one of psi*.
template <typename Scalar>
void boundary_prox(const Problem<Scalar>& prob, Scalar t, VectorX<Scalar>& x0,
                   VectorX<Scalar>& xN) {
  using Vector = VectorX<Scalar>;
  require(t > Scalar(0), "boundary_prox: step must be > 0");
  const auto& bc = prob.boundary;
  switch (prob.kind) {
    case FlowKind::GradientFlow: {
      const Vector a = bc.psi.prox(Scalar(2) * t, Vector(x0 - xN));
      const Vector c = x0 + xN;
      const Vector w = bc.psi_star.prox(t / Scalar(2), Vector(-Scalar(0.5) * c));
      const Vector cs = -Scalar(2) * w;
      x0 = Scalar(0.5) * (cs + a);
      xN = Scalar(0.5) * (cs - a);
      break;
    }
    case FlowKind::HamiltonianJ1: {
      const Vector a = bc.psi.prox(Scalar(2) * t, Vector(xN - x0));
      const Vector c = x0 + xN;
      const Vector w = bc.psi_star.prox(t / Scalar(2), Vector(-Scalar(0.5) * apply_J(c)));
      const Vector cs = Scalar(2) * apply_J(w);
      xN = Scalar(0.5) * (cs + a);
      x0 = Scalar(0.5) * (cs - a);
      break;
    }
    case FlowKind::HamiltonianJ2: {
      x0 = bc.psi.prox(t, x0);
      const Vector w = bc.psi_star.prox(t, apply_J(xN));
      xN = -apply_J(w);
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Anti-selfduality check
// ---------------------------------------------------------------------------

/// Max over samples of |L*(p,x) - L(-x,-p)| for L(x,p) = phi(x) + phi*(-p),
/// with L* evaluated by numeric grid conjugation. The joint sup separates
/// exactly: L*(p,x) = [sup_xi <xi,p> - phi(xi)] + [sup_pi <pi,x> - phi*(-pi)],
/// so each side is a d-dimensional refined grid supremum (d <= 2).
template <typename Scalar>
Scalar asd_check(const ConvexFunction<Scalar>& phi,
                 const std::vector<std::pair<VectorX<Scalar>, VectorX<Scalar>>>& samples,
                 const ConjugateOptions<Scalar>& opts = {}) {
  require(phi.dimension() <= 2, "asd_check: numeric double conjugation supports d <= 2");
  require(phi.capabilities().has_closed_conjugate,
          "asd_check: phi must carry a conjugate (closed form or supplied pair)");
  const Eigen::Index d = phi.dimension();
  const ConvexFunction<Scalar> phi_star_neg = custom_function<Scalar>(
      d,
      [phi](const VectorX<Scalar>& pi) { return phi.conjugate_value(VectorX<Scalar>(-pi)); },
      nullptr, nullptr, {}, "phi*(-.)");

  Scalar worst = Scalar(0);
  for (const auto& [x, p] : samples) {
    require(x.size() == d && p.size() == d, "asd_check: sample dimension mismatch");
    const Scalar rhs = phi.value(VectorX<Scalar>(-x)) + phi.conjugate_value(p);
    require(is_finite(rhs), "asd_check: sample outside the domain of the closed-form side");
    const Scalar lhs = grid_conjugate(phi, p, opts) + grid_conjugate(phi_star_neg, x, opts);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Second-order reduction
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
const IndicatorPointTerm<Scalar>* as_indicator_point(const ConvexFunction<Scalar>& f) {
  return dynamic_cast<const IndicatorPointTerm<Scalar>*>(&f.term());
}

}  // namespace detail

/// Result of lifting -qddot = grad phi(t, q) to phase space u = (p, q) with
/// qdot = beta p. The phase problem is a J1 instance on R^{2d}; the
/// extractors recover the configuration path and its velocity.
template <typename Scalar = double>
struct SecondOrderReduction {
  Problem<Scalar> phase;
  Scalar beta = Scalar(0);
  Eigen::Index config_dim = 0;

  MatrixX<Scalar> extract_q(const Path<Scalar>& phase_path) const {
    return phase_path.nodes.bottomRows(config_dim);
  }
  MatrixX<Scalar> extract_qdot(const Path<Scalar>& phase_path) const {
    return beta * phase_path.nodes.topRows(config_dim);
  }
};

using SecondOrderReductiond = SecondOrderReduction<double>;

/// Builds the phase-space problem with potential
///   Phi(t, (p,q)) = (beta/2)|p|^2 + (1/beta) phi(t, q)
/// and boundary Psi(p,q) = psi1(p) + psi2(q). The minimizer satisfies
/// qdot = beta p and -pdot = (1/beta) grad phi(t,q), hence
/// -qddot = grad phi(t,q).
///
/// When growth bounds for phi are declared, their quadratic coefficient
/// must not exceed beta^2 (the consistent reading of the growth window for
/// the reduced potential); violations are rejected rather than silently
/// rescaled.
template <typename Scalar>
SecondOrderReduction<Scalar> second_order_reduce(
    const TimeConvexFunction<Scalar>& phi, ConvexFunction<Scalar> psi1,
    ConvexFunction<Scalar> psi2, Scalar beta, const PathGrid<Scalar>& q_grid,
    std::optional<GrowthBounds<Scalar>> growth_phi = {}) {
  const Scalar limit = resonance_limit(q_grid.T);
  require(beta > Scalar(0) && beta < limit,
          "second_order_reduce: beta must lie in (0, pi/(2T)) = (0, " +
              std::to_string(static_cast<double>(limit)) + ")");
  const Eigen::Index d = q_grid.d;
  require(phi.dimension() == d, "second_order_reduce: phi dimension != grid dimension");
  require(psi1.dimension() == d && psi2.dimension() == d,
          "second_order_reduce: psi1/psi2 dimension mismatch");

  TimeConvexFunction<Scalar> Phi(
      q_grid.T, 2 * d, [phi, beta, d](Scalar t) {
        std::vector<ConvexFunction<Scalar>> parts;
        parts.push_back(scaled_squared_norm<Scalar>(beta, d));
        parts.push_back(scale(phi.at(t), Scalar(1) / beta));
        return separable_sum(std::move(parts));
      });

  BoundaryCondition<Scalar> bc;
  const auto* pt1 = detail::as_indicator_point(psi1);
  const auto* pt2 = detail::as_indicator_point(psi2);
  const bool zero_anchors =
      pt1 && pt2 && psi1.prox(Scalar(1), VectorX<Scalar>::Zero(d)).isZero(Scalar(0)) &&
      psi2.prox(Scalar(1), VectorX<Scalar>::Zero(d)).isZero(Scalar(0));
  if (zero_anchors) {
    // zero-anchored point indicators pin u(T) = u(0): periodic endpoint data
    bc = convex_set_gap_boundary(indicator_point(VectorX<Scalar>::Zero(2 * d)));
    bc.kind = BoundaryKind::Periodic;
  } else if (psi1.name() == "zero" && psi2.name() == "zero") {
    // Psi identically zero pins the endpoint mean instead: anti-periodic
    bc = antiperiodic_boundary<Scalar>(2 * d);
  } else {
    std::vector<ConvexFunction<Scalar>> ps{psi1, psi2};
    std::vector<ConvexFunction<Scalar>> cs{conjugate_function(psi1), conjugate_function(psi2)};
    bc = custom_boundary(separable_sum(std::move(ps)), separable_sum(std::move(cs)));
  }

  GrowthBounds<Scalar> reduced{beta, Scalar(0), Scalar(0)};
  if (growth_phi) {
    require(growth_phi->beta <= beta * beta * (Scalar(1) + Scalar(1e-9)),
            "second_order_reduce: declared quadratic growth of phi exceeds beta^2; the "
            "reduced potential would leave the (0, pi/(2T)) window");
    reduced.alpha_bar = growth_phi->alpha_bar / beta;
    reduced.gamma_bar = growth_phi->gamma_bar / beta;
  }

  SecondOrderReduction<Scalar> out;
  out.beta = beta;
  out.config_dim = d;
  out.phase = hamiltonian_problem(FlowKind::HamiltonianJ1, std::move(Phi), std::move(bc),
                                  PathGrid<Scalar>(q_grid.T, q_grid.N, 2 * d), reduced);
  return out;
}

}  // namespace sdflow
