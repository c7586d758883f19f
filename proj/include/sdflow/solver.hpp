#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sdflow/core.hpp"
#include "sdflow/lagrangians.hpp"

namespace sdflow {

enum class SolveMethod { Auto, QuasiNewtonSmooth, ProximalGradientAccelerated };

inline const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::Auto: return "auto";
    case SolveMethod::QuasiNewtonSmooth: return "quasi_newton_smooth";
    case SolveMethod::ProximalGradientAccelerated: return "proximal_gradient_accelerated";
  }
  return "?";
}

/// Geometric continuation schedule: start, start*ratio, ... down to floor.
template <typename Scalar = double>
struct ScheduleSpec {
  Scalar start = Scalar(1e-2);
  Scalar ratio = Scalar(0.1);
  Scalar floor = Scalar(1e-8);
};

template <typename Scalar = double>
struct SolverOptions {
  int max_iterations = 5000;             // per continuation stage
  Scalar gradient_tolerance = Scalar(1e-9);
  Scalar objective_tolerance = Scalar(1e-8);  // certificate gap threshold
  ScheduleSpec<Scalar> epsilon_schedule{};
  ScheduleSpec<Scalar> lambda_schedule{};
  SolveMethod method = SolveMethod::Auto;
  int lbfgs_memory = 10;
};

using SolverOptionsd = SolverOptions<double>;

template <typename Scalar = double>
struct ScheduleStage {
  Scalar epsilon = Scalar(0);
  Scalar lambda = Scalar(0);
  Scalar objective = Scalar(0);  // achieved value of the stage functional
  int iterations = 0;
};

/// Certificate-carrying result: the objective *is* the certificate gap and
/// always equals h * sum(interval_residuals) + boundary_residual.
template <typename Scalar = double>
struct SolveReport {
  Path<Scalar> path;
  Scalar objective = plus_infinity<Scalar>();
  VectorX<Scalar> interval_residuals;
  Scalar boundary_residual = plus_infinity<Scalar>();
  int iterations = 0;
  bool converged = false;
  Scalar stationarity = plus_infinity<Scalar>();
  std::vector<ScheduleStage<Scalar>> schedule_trace;
  std::string method_used;
  // The residual fields describe the last regularized stage instead of the
  // original functional (which was infinite at the returned path).
  bool residuals_regularized = false;
};

using SolveReportd = SolveReport<double>;

template <typename Scalar = double>
struct CertificateVerdict {
  bool pass = false;
  Scalar max_interval_residual = Scalar(0);
  int worst_interval = -1;
  Scalar boundary_residual = Scalar(0);
  Scalar tol = Scalar(0);
  Scalar interval_budget = Scalar(0);
};

/// Pass iff every interval residual fits the tol/h-weighted budget
/// (h * r_i <= tol) and the boundary residual is at most tol. Works on any
/// path over the problem's grid, independent of how it was produced.
template <typename Scalar>
CertificateVerdict<Scalar> certify(const Problem<Scalar>& prob, const Path<Scalar>& p,
                                   Scalar tol) {
  require(tol > Scalar(0), "certify: tol must be > 0");
  const FunctionalBreakdown<Scalar> bd = evaluate_functional(prob, p);
  CertificateVerdict<Scalar> v;
  v.tol = tol;
  v.interval_budget = tol / prob.grid.h();
  v.boundary_residual = bd.boundary_residual;
  for (int i = 0; i < prob.grid.N; ++i) {
    const Scalar r = bd.interval_residuals[i];
    if (r > v.max_interval_residual || i == 0) {
      v.max_interval_residual = r;
      v.worst_interval = i;
    }
  }
  v.pass = is_finite(bd.value) && v.max_interval_residual <= v.interval_budget &&
           bd.boundary_residual <= tol;
  return v;
}

template <typename Scalar = double>
struct ResonanceAdvisory {
  bool pass = false;
  Scalar beta = Scalar(0);
  Scalar limit = Scalar(0);
  std::string message;
};

/// Existence window check: pass iff the declared growth beta lies strictly
/// inside (0, pi/(2T)). A violation is an advisory, not an error -- the
/// discrete problem may still be solvable, but the zero-infimum guarantee
/// is void.
template <typename Scalar>
ResonanceAdvisory<Scalar> resonance_guard(const Problem<Scalar>& prob) {
  require(prob.kind != FlowKind::GradientFlow, "resonance_guard: Hamiltonian kinds only");
  require(prob.growth.has_value(), "resonance_guard: problem carries no growth bounds");
  ResonanceAdvisory<Scalar> adv;
  adv.beta = prob.growth->beta;
  adv.limit = resonance_limit(prob.grid.T);
  adv.pass = adv.beta > Scalar(0) && adv.beta < adv.limit;
  if (!adv.pass)
    adv.message = "growth beta = " + std::to_string(static_cast<double>(adv.beta)) +
                  " outside (0, " + std::to_string(static_cast<double>(adv.limit)) +
                  "): the zero-infimum guarantee does not apply";
  return adv;
}

namespace detail {

template <typename Scalar>
struct InnerResult {
  Scalar objective = plus_infinity<Scalar>();
  Scalar stationarity = plus_infinity<Scalar>();
  int iterations = 0;
};

/// Limited-memory BFGS with a strong-Wolfe line search. `fg(z, g)` returns
/// the objective (possibly +inf outside the domain) and fills the gradient
/// when finite. Deterministic: no randomization, fixed evaluation order.
template <typename Scalar, typename Fg>
InnerResult<Scalar> lbfgs_minimize(Fg&& fg, VectorX<Scalar>& z, int max_iter, Scalar gtol,
                                   int memory) {
  using Vector = VectorX<Scalar>;
  const Eigen::Index n = z.size();
  InnerResult<Scalar> res;

  std::vector<Vector> S, Y;
  std::vector<Scalar> rho;

  Vector g(n), g_new(n);
  Scalar f = fg(z, g);
  if (!is_finite(f))
    throw numeric_error("lbfgs: objective infinite at the initial point",
                        static_cast<double>(f));

  Vector d(n), z_new(n);
  std::vector<Scalar> alpha_buf;

  int stalls = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    const Scalar gn = g.norm();
    res.objective = f;
    res.stationarity = gn;
    if (gn <= gtol) break;

    // two-loop recursion
    d = -g;
    const int m = static_cast<int>(S.size());
    alpha_buf.assign(static_cast<std::size_t>(m), Scalar(0));
    for (int i = m - 1; i >= 0; --i) {
      const auto ui = static_cast<std::size_t>(i);
      alpha_buf[ui] = rho[ui] * S[ui].dot(d);
      d -= alpha_buf[ui] * Y[ui];
    }
    if (m > 0) {
      const auto last = static_cast<std::size_t>(m - 1);
      const Scalar gamma = S[last].dot(Y[last]) / Y[last].squaredNorm();
      d *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Scalar beta = rho[ui] * Y[ui].dot(d);
      d += (alpha_buf[ui] - beta) * S[ui];
    }

    Scalar dg = g.dot(d);
    if (dg >= Scalar(0)) {  // defective direction, restart from steepest descent
      d = -g;
      dg = -gn * gn;
      S.clear();
      Y.clear();
      rho.clear();
    }

    // strong-Wolfe line search; near the floating-point floor of f the
    // sufficient-decrease test becomes unresolvable, so a step that still
    // shrinks the gradient norm is salvaged instead.
    const Scalar c1 = Scalar(1e-4), c2 = Scalar(0.9);
    Scalar lo = Scalar(0), hi = plus_infinity<Scalar>();
    Scalar step = Scalar(1);
    Scalar f_new = f;
    bool accepted = false;
    Scalar salvage_step = Scalar(-1), salvage_gn = gn;
    for (int ls = 0; ls < 50; ++ls) {
      z_new = z + step * d;
      f_new = fg(z_new, g_new);
      if (is_finite(f_new)) {
        const Scalar gnn = g_new.norm();
        if (gnn < salvage_gn && f_new <= f + Scalar(16) * std::numeric_limits<Scalar>::epsilon() *
                                              (Scalar(1) + std::abs(f))) {
          salvage_gn = gnn;
          salvage_step = step;
        }
      }
      const Scalar f_noise =
          Scalar(16) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + std::abs(f));
      if (!is_finite(f_new) || f_new > f + c1 * step * dg + f_noise) {
        hi = step;
      } else if (std::abs(g_new.dot(d)) <= -c2 * dg) {
        accepted = true;
        break;
      } else if (g_new.dot(d) >= Scalar(0)) {
        accepted = true;  // decrease achieved and curvature bracketed
        break;
      } else {
        lo = step;
      }
      step = is_finite(hi) ? Scalar(0.5) * (lo + hi) : Scalar(2) * step;
      if (step <= Scalar(1e-20)) break;
    }
    if (!accepted && (!is_finite(f_new) || f_new >= f)) {
      if (lo > Scalar(0)) {
        z_new = z + lo * d;
        f_new = fg(z_new, g_new);
        if (is_finite(f_new) && f_new < f) accepted = true;
      }
      if (!accepted && salvage_step > Scalar(0) && salvage_gn < Scalar(0.999) * gn) {
        z_new = z + salvage_step * d;
        f_new = fg(z_new, g_new);
        accepted = true;
      }
      if (!accepted) {
        if (++stalls >= 2) break;  // gradient at its numerical floor
        S.clear();
        Y.clear();
        rho.clear();
        continue;
      }
    }
    stalls = 0;

    const Vector s = z_new - z;
    const Vector y = g_new - g;
    const Scalar sy = s.dot(y);
    if (sy > Scalar(1e-12) * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(Scalar(1) / sy);
      if (static_cast<int>(S.size()) > memory) {
        S.erase(S.begin());
        Y.erase(Y.begin());
        rho.erase(rho.begin());
      }
    }
    z = z_new;
    f = f_new;
    g = g_new;
  }
  res.objective = f;
  res.stationarity = g.norm();
  res.iterations = it;
  return res;
}

/// FISTA with backtracking and gradient-based adaptive restart on the
/// composite objective g + h, where prox_h is exact.
template <typename Scalar, typename Gfg, typename ProxH, typename Hval>
InnerResult<Scalar> fista_minimize(Gfg&& gfg, ProxH&& prox_h, Hval&& hval, VectorX<Scalar>& z,
                                   int max_iter, Scalar gtol) {
  using Vector = VectorX<Scalar>;
  const Eigen::Index n = z.size();
  InnerResult<Scalar> res;

  Vector x = z;
  prox_h(Scalar(1), x);  // feasible start: one exact prox of the boundary block
  Vector y = x, x_old(n), grad(n), cand(n);
  Scalar t_momentum = Scalar(1);
  Scalar step = Scalar(1);

  Scalar gy = gfg(y, grad);
  if (!is_finite(gy))
    throw numeric_error("fista: smooth part infinite at the initial point",
                        static_cast<double>(gy));

  int it = 0;
  for (; it < max_iter; ++it) {
    // backtracking proximal step from y
    Scalar gc = Scalar(0);
    for (int ls = 0; ls < 60; ++ls) {
      cand = y - step * grad;
      prox_h(step, cand);
      Vector diff = cand - y;
      Vector dummy(n);
      gc = gfg(cand, dummy);
      if (is_finite(gc) &&
          gc <= gy + grad.dot(diff) + diff.squaredNorm() / (Scalar(2) * step)) {
        break;
      }
      step *= Scalar(0.5);
      if (step <= Scalar(1e-20))
        throw numeric_error("fista: step collapsed during backtracking",
                            static_cast<double>(gc));
    }

    x_old = x;
    x = cand;

    // composite gradient mapping at y (first-order stationarity measure)
    const Scalar map_norm = (y - x).norm() / step;
    res.stationarity = map_norm;
    if (map_norm <= gtol && it > 0) {
      ++it;
      break;
    }

    // adaptive restart: momentum against the descent direction
    const Vector dx = x - x_old;
    if ((y - x).dot(dx) > Scalar(0)) {
      t_momentum = Scalar(1);
      y = x;
    } else {
      const Scalar t_next = Scalar(0.5) * (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t_momentum * t_momentum));
      y = x + ((t_momentum - Scalar(1)) / t_next) * dx;
      t_momentum = t_next;
    }
    gy = gfg(y, grad);
    step *= Scalar(1.3);  // allow regrowth; backtracking will trim it
  }

  z = x;
  Vector dummy(n);
  res.objective = gfg(z, dummy) + hval(z);
  res.iterations = it;
  return res;
}

template <typename Scalar>
Scalar boundary_psi_value(const Problem<Scalar>& prob, const VectorX<Scalar>& x0,
                          const VectorX<Scalar>& xN) {
  using Vector = VectorX<Scalar>;
  const auto& bc = prob.boundary;
  Scalar va, vb;
  switch (prob.kind) {
    case FlowKind::GradientFlow:
      va = bc.psi.value(Vector(x0 - xN));
      vb = bc.psi_star.value(Vector(-Scalar(0.5) * (x0 + xN)));
      break;
    case FlowKind::HamiltonianJ1:
      va = bc.psi.value(Vector(xN - x0));
      vb = bc.psi_star.value(Vector(-Scalar(0.5) * apply_J(Vector(x0 + xN))));
      break;
    case FlowKind::HamiltonianJ2:
    default:
      va = bc.psi.value(x0);
      vb = bc.psi_star.value(apply_J(xN));
      break;
  }
  return (is_finite(va) && is_finite(vb)) ? va + vb : plus_infinity<Scalar>();
}

/// Affine endpoint slice x_N = sign * x_0 + offset. On the slice the
/// boundary residual of the matching indicator kinds vanishes identically.
template <typename Scalar>
struct EndpointSlice {
  bool active = false;
  Scalar sign = Scalar(1);
  VectorX<Scalar> offset;
};

template <typename Scalar>
EndpointSlice<Scalar> detect_slice(const Problem<Scalar>& prob) {
  EndpointSlice<Scalar> s;
  s.offset = VectorX<Scalar>::Zero(prob.grid.d);
  if (prob.kind == FlowKind::HamiltonianJ2) return s;
  switch (prob.boundary.kind) {
    case BoundaryKind::Periodic:
      s.active = true;
      break;
    case BoundaryKind::AntiPeriodic:
      s.active = true;
      s.sign = Scalar(-1);
      break;
    case BoundaryKind::ConvexSetGap:
      if (prob.boundary.psi.name() == "indicator_point") {
        s.active = true;
        // gradient flow gap: x0 - xN = anchor; J1 gap: xN - x0 = anchor
        s.offset = (prob.kind == FlowKind::GradientFlow) ? VectorX<Scalar>(-prob.boundary.anchor)
                                                         : prob.boundary.anchor;
      }
      break;
    default:
      break;
  }
  return s;
}

}  // namespace detail

/// Minimizes the selfdual functional of `prob`, stage-wise over the
/// epsilon/lambda continuation schedules, and returns the certificate
/// report. Never throws on plain non-convergence: the best path comes back
/// with converged = false. The reported objective and residuals are those
/// of the ORIGINAL functional whenever it is finite at the final path.
template <typename Scalar>
SolveReport<Scalar> minimize(const Problem<Scalar>& prob, const SolverOptions<Scalar>& opts = {},
                             const Path<Scalar>* init = nullptr) {
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  validate(prob);
  require(opts.gradient_tolerance > Scalar(0) && opts.objective_tolerance > Scalar(0),
          "minimize: tolerances must be > 0");
  require(opts.epsilon_schedule.ratio > Scalar(0) && opts.epsilon_schedule.ratio < Scalar(1) &&
              opts.lambda_schedule.ratio > Scalar(0) && opts.lambda_schedule.ratio < Scalar(1),
          "minimize: schedule ratios must lie in (0,1)");

  const int N = prob.grid.N;
  const Eigen::Index d = prob.grid.d;

  // capability analysis
  const Capabilities phi_caps = prob.phi.at(Scalar(0)).capabilities();
  const bool interior_ok =
      phi_caps.has_closed_conjugate && phi_caps.conjugate_finite && phi_caps.conjugate_smooth;
  const bool needs_eps = !interior_ok;
  require(interior_ok || phi_caps.prox_exact,
          "minimize: potential needs a finite smooth conjugate or an exact prox "
          "(for epsilon-perturbation)");

  const auto& bc = prob.boundary;
  const bool boundary_smooth = bc.psi.capabilities().smooth && bc.psi_star.capabilities().smooth;
  const detail::EndpointSlice<Scalar> slice = detail::detect_slice(prob);

  enum class Plan { SliceQN, FullQN, RegularizedQN, Fista };
  Plan plan;
  switch (opts.method) {
    case SolveMethod::Auto:
      plan = slice.active ? Plan::SliceQN
                          : (boundary_smooth ? Plan::FullQN : Plan::Fista);
      break;
    case SolveMethod::QuasiNewtonSmooth:
      plan = slice.active ? Plan::SliceQN
                          : (boundary_smooth ? Plan::FullQN : Plan::RegularizedQN);
      break;
    case SolveMethod::ProximalGradientAccelerated:
    default:
      plan = Plan::Fista;
      break;
  }

  const bool needs_lambda =
      plan == Plan::RegularizedQN && !bc.psi.capabilities().smooth;
  const bool needs_boundary_eps =
      plan == Plan::RegularizedQN && !bc.psi_star.capabilities().smooth;

  // initial path
  Path<Scalar> current = init ? *init : Path<Scalar>::zero(prob.grid);
  require(current.grid == prob.grid, "minimize: init path grid mismatch");
  if (slice.active) {
    Matrix nodes = current.nodes;
    nodes.col(N) = slice.sign * nodes.col(0) + slice.offset;
    current = Path<Scalar>(prob.grid, std::move(nodes));
  }

  // continuation stage list
  struct StagePair {
    Scalar eps, lambda;
  };
  std::vector<StagePair> stages;
  {
    const bool any_schedule = needs_eps || needs_lambda || needs_boundary_eps;
    if (!any_schedule) {
      stages.push_back({Scalar(0), Scalar(0)});
    } else {
      Scalar e = opts.epsilon_schedule.start;
      Scalar l = opts.lambda_schedule.start;
      for (int k = 0; k < 64; ++k) {
        stages.push_back({needs_eps || needs_boundary_eps ? std::max(e, opts.epsilon_schedule.floor) : Scalar(0),
                          needs_lambda ? std::max(l, opts.lambda_schedule.floor) : Scalar(0)});
        const bool e_floored = e <= opts.epsilon_schedule.floor;
        const bool l_floored = l <= opts.lambda_schedule.floor;
        if (e_floored && l_floored) break;
        e *= opts.epsilon_schedule.ratio;
        l *= opts.lambda_schedule.ratio;
      }
    }
  }

  SolveReport<Scalar> report;
  report.method_used = slice.active && plan == Plan::SliceQN ? "quasi_newton_smooth(slice)"
                       : plan == Plan::FullQN                ? "quasi_newton_smooth"
                       : plan == Plan::RegularizedQN ? "quasi_newton_smooth(regularized)"
                                                     : "proximal_gradient_accelerated";

  int total_iterations = 0;
  Scalar last_stage_objective = plus_infinity<Scalar>();
  Scalar final_stationarity = plus_infinity<Scalar>();
  Problem<Scalar> last_stage_problem = prob;

  for (std::size_t k = 0; k < stages.size(); ++k) {
    const Scalar eps = stages[k].eps;
    const Scalar lambda = stages[k].lambda;

    Problem<Scalar> stage = prob;
    if (needs_eps && eps > Scalar(0)) stage.phi = epsilon_perturb(prob.phi, eps);
    if (plan == Plan::RegularizedQN) {
      BoundaryCondition<Scalar> rb = prob.boundary;
      if (needs_lambda && lambda > Scalar(0)) rb = lambda_regularize(rb, lambda);
      if (needs_boundary_eps && eps > Scalar(0)) rb = epsilon_perturb_boundary(rb, eps);
      stage.boundary = std::move(rb);
    }
    last_stage_problem = stage;

    // automatic feasible re-initialization (first stage only): pull every
    // node into the domain of phi, then restore the endpoint structure
    if (k == 0) {
      const bool finite_here = (plan == Plan::Fista)
                                   ? evaluate_smooth_part(stage, current).finite()
                                   : evaluate_functional(stage, current).finite();
      if (!finite_here) {
        Matrix nodes = current.nodes;
        const ConvexFunction<Scalar> f0 = stage.phi.at(Scalar(0));
        for (int i = 0; i <= N; ++i) nodes.col(i) = f0.prox(Scalar(1), nodes.col(i));
        if (slice.active) nodes.col(N) = slice.sign * nodes.col(0) + slice.offset;
        Path<Scalar> repaired(prob.grid, std::move(nodes));
        const bool repaired_ok = (plan == Plan::Fista)
                                     ? evaluate_smooth_part(stage, repaired).finite()
                                     : evaluate_functional(stage, repaired).finite();
        if (!repaired_ok)
          throw numeric_error("minimize: could not find a feasible initial path");
        current = repaired;
      }
    }

    detail::InnerResult<Scalar> inner;
    if (plan == Plan::Fista) {
      Vector z = Eigen::Map<const Vector>(current.nodes.data(), current.nodes.size());
      auto gfg = [&](const Vector& zz, Vector& grad_out) {
        Path<Scalar> path(prob.grid, Eigen::Map<const Matrix>(zz.data(), d, N + 1));
        Matrix gm;
        const auto bd = evaluate_smooth_part(stage, path, &gm);
        if (bd.finite()) grad_out = Eigen::Map<const Vector>(gm.data(), gm.size());
        return bd.value;
      };
      auto prox_h = [&](Scalar t, Vector& zz) {
        Vector x0 = zz.segment(0, d);
        Vector xN = zz.segment(static_cast<Eigen::Index>(N) * d, d);
        boundary_prox(stage, t, x0, xN);
        zz.segment(0, d) = x0;
        zz.segment(static_cast<Eigen::Index>(N) * d, d) = xN;
      };
      auto hval = [&](const Vector& zz) {
        return detail::boundary_psi_value(stage, Vector(zz.segment(0, d)),
                                          Vector(zz.segment(static_cast<Eigen::Index>(N) * d, d)));
      };
      inner = detail::fista_minimize(gfg, prox_h, hval, z, opts.max_iterations,
                                     opts.gradient_tolerance);
      current = Path<Scalar>(prob.grid, Eigen::Map<const Matrix>(z.data(), d, N + 1));
    } else if (plan == Plan::SliceQN) {
      Vector z = Eigen::Map<const Vector>(current.nodes.data(),
                                          static_cast<Eigen::Index>(N) * d);
      Matrix nodes(d, N + 1), gm;
      auto fg = [&](const Vector& zz, Vector& grad_out) {
        nodes.leftCols(N) = Eigen::Map<const Matrix>(zz.data(), d, N);
        nodes.col(N) = slice.sign * nodes.col(0) + slice.offset;
        Path<Scalar> path(prob.grid, nodes);
        const auto bd = evaluate_with_gradient(stage, path, gm);
        if (bd.finite()) {
          gm.col(0) += slice.sign * gm.col(N);
          grad_out = Eigen::Map<const Vector>(gm.data(), static_cast<Eigen::Index>(N) * d);
        }
        return bd.value;
      };
      inner = detail::lbfgs_minimize(fg, z, opts.max_iterations, opts.gradient_tolerance,
                                     opts.lbfgs_memory);
      nodes.leftCols(N) = Eigen::Map<const Matrix>(z.data(), d, N);
      nodes.col(N) = slice.sign * nodes.col(0) + slice.offset;
      current = Path<Scalar>(prob.grid, nodes);
    } else {
      Vector z = Eigen::Map<const Vector>(current.nodes.data(), current.nodes.size());
      Matrix gm;
      auto fg = [&](const Vector& zz, Vector& grad_out) {
        Path<Scalar> path(prob.grid, Eigen::Map<const Matrix>(zz.data(), d, N + 1));
        const auto bd = evaluate_with_gradient(stage, path, gm);
        if (bd.finite()) grad_out = Eigen::Map<const Vector>(gm.data(), gm.size());
        return bd.value;
      };
      inner = detail::lbfgs_minimize(fg, z, opts.max_iterations, opts.gradient_tolerance,
                                     opts.lbfgs_memory);
      current = Path<Scalar>(prob.grid, Eigen::Map<const Matrix>(z.data(), d, N + 1));
    }

    total_iterations += inner.iterations;
    final_stationarity = inner.stationarity;
    report.schedule_trace.push_back({eps, lambda, inner.objective, inner.iterations});

    // continuation stopping: stop once the certificate has stabilized
    const Scalar prev = last_stage_objective;
    last_stage_objective = inner.objective;
    if (k > 0 && std::abs(inner.objective - prev) <= Scalar(0.1) * opts.objective_tolerance)
      break;
  }

  // final certificate on the ORIGINAL functional
  FunctionalBreakdown<Scalar> bd = evaluate_functional(prob, current);
  if (!bd.finite()) {
    bd = evaluate_functional(last_stage_problem, current);
    report.residuals_regularized = true;
  }
  report.path = current;
  report.objective = bd.value;
  report.interval_residuals = bd.interval_residuals;
  report.boundary_residual = bd.boundary_residual;
  report.iterations = total_iterations;
  report.stationarity = final_stationarity;
  report.converged = !report.residuals_regularized && is_finite(bd.value) &&
                     bd.value <= opts.objective_tolerance &&
                     final_stationarity <= opts.gradient_tolerance;
  return report;
}

}  // namespace sdflow
