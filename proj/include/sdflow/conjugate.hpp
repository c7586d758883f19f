#pragma once

#include <array>
#include <cmath>
#include <string>

#include "sdflow/convex.hpp"
#include "sdflow/core.hpp"

namespace sdflow {

/// Knobs of the numeric conjugation paths. The bracket radius bounds the
/// search region [-R, R]^d; grids use `grid_points` per axis with
/// `refine_passes` shrink-and-rescan passes around the incumbent.
template <typename Scalar = double>
struct ConjugateOptions {
  Scalar bracket_radius = Scalar(1e3);
  int grid_points = 101;
  int refine_passes = 2;
  Scalar tol = Scalar(1e-10);
  int max_iterations = 200;
};

template <typename Scalar>
struct SupResult {
  Scalar value = -plus_infinity<Scalar>();
  VectorX<Scalar> argmax;
};

namespace detail {

/// sup over x in [-R,R] of x*y - f(x) for smooth f via the stationarity
/// equation f'(x) = y: safeguarded root find (secant step accepted only
/// inside the current sign-change bracket, bisection otherwise).
template <typename Scalar>
SupResult<Scalar> conjugate_smooth_1d(const ConvexFunction<Scalar>& f, Scalar y,
                                      const ConjugateOptions<Scalar>& opts) {
  using Vector = VectorX<Scalar>;
  const Scalar R = opts.bracket_radius;
  auto slope = [&](Scalar x) {
    Vector xv(1);
    xv[0] = x;
    return f.subgradient(xv)[0] - y;
  };
  auto objective = [&](Scalar x) {
    Vector xv(1);
    xv[0] = x;
    return x * y - f.value(xv);
  };

  Scalar a = -R, b = R;
  Scalar ga = slope(a), gb = slope(b);
  if (ga > Scalar(0) || gb < Scalar(0)) {
    // Monotone slope of x*y - f(x) over the whole bracket: the supremum
    // escapes the search region, so report the best bound found instead of
    // overflowing.
    const Scalar best = std::max(objective(a), objective(b));
    throw numeric_error(
        "conjugate: stationary point escapes bracket [-R, R], R = " +
            std::to_string(static_cast<double>(R)) + "; widen bracket_radius",
        static_cast<double>(best));
  }

  // bisection guarantees the bracket halves; a secant proposal is tried
  // first whenever it falls well inside the bracket (Newton-style
  // acceleration with a safeguard)
  Scalar x = Scalar(0.5) * (a + b);
  for (int it = 0; it < opts.max_iterations; ++it) {
    Scalar cand = Scalar(0.5) * (a + b);
    if (gb != ga) {
      const Scalar sec = a - ga * (b - a) / (gb - ga);
      const Scalar margin = Scalar(0.01) * (b - a);
      if (sec > a + margin && sec < b - margin && it % 2 == 0) cand = sec;
    }
    const Scalar gc = slope(cand);
    if (std::abs(gc) <= opts.tol * (Scalar(1) + std::abs(y))) {
      x = cand;
      break;
    }
    if (gc < Scalar(0)) {
      a = cand;
      ga = gc;
    } else {
      b = cand;
      gb = gc;
    }
    x = Scalar(0.5) * (a + b);
    if (b - a <= Scalar(1e-14) * std::max(Scalar(1), std::max(std::abs(a), std::abs(b)))) break;
  }

  SupResult<Scalar> out;
  out.argmax.resize(1);
  out.argmax[0] = x;
  out.value = objective(x);
  return out;
}

/// Grid supremum of <x,y> - f(x) over [-R,R]^d with refinement, d <= 3.
/// +inf values of f are skipped. A supremum landing on the outer boundary
/// of the initial box is treated as divergence.
template <typename Scalar>
SupResult<Scalar> conjugate_grid(const ConvexFunction<Scalar>& f, const VectorX<Scalar>& y,
                                 const ConjugateOptions<Scalar>& opts) {
  using Vector = VectorX<Scalar>;
  const Eigen::Index d = f.dimension();
  require(d <= 3, "conjugate: grid path supports d <= 3; supply a closed-form conjugate");
  const int n = opts.grid_points;

  Vector center = Vector::Zero(d);
  Scalar width = opts.bracket_radius;

  SupResult<Scalar> best;
  best.argmax = Vector::Zero(d);

  for (int pass = 0; pass <= opts.refine_passes; ++pass) {
    std::array<int, 3> idx = {0, 0, 0};
    bool pass_found = false;
    Vector pass_arg = Vector::Zero(d);
    Scalar pass_val = -plus_infinity<Scalar>();
    Vector x(d);
    const Scalar step = Scalar(2) * width / Scalar(n - 1);
    for (;;) {
      for (Eigen::Index k = 0; k < d; ++k)
        x[k] = center[k] - width + step * Scalar(idx[static_cast<std::size_t>(k)]);
      const Scalar fx = f.value(x);
      if (is_finite(fx)) {
        const Scalar s = x.dot(y) - fx;
        if (!pass_found || s > pass_val) {
          pass_found = true;
          pass_val = s;
          pass_arg = x;
        }
      }
      // odometer increment over the d-dimensional index
      Eigen::Index k = 0;
      for (; k < d; ++k) {
        if (++idx[static_cast<std::size_t>(k)] < n) break;
        idx[static_cast<std::size_t>(k)] = 0;
      }
      if (k == d) break;
    }

    if (!pass_found)
      throw numeric_error("conjugate: no finite value of f found on the search grid",
                          -plus_infinity<double>());

    if (pass == 0) {
      // escape check against the outer box
      for (Eigen::Index k = 0; k < d; ++k) {
        if (std::abs(pass_arg[k]) >= opts.bracket_radius - step / Scalar(2)) {
          std::string dir = "(";
          for (Eigen::Index j = 0; j < d; ++j) {
            dir += (j == k) ? (pass_arg[k] > 0 ? "+1" : "-1") : "0";
            if (j + 1 < d) dir += ",";
          }
          dir += ")";
          throw numeric_error("conjugate: grid supremum escapes along direction " + dir +
                                  "; f appears non-coercive over the bracket",
                              static_cast<double>(pass_val));
        }
      }
    }

    best.value = pass_val;
    best.argmax = pass_arg;
    center = pass_arg;
    width = Scalar(2) * step;
  }
  return best;
}

}  // namespace detail

/// Fenchel-Legendre conjugate f*(y) = sup_x { <x,y> - f(x) }. Closed-form
/// path when available; otherwise a safeguarded 1-D stationarity solve for
/// smooth f, or a refined grid supremum for d <= 3. Infinite conjugate
/// values reachable in closed form come back as explicit +inf; the numeric
/// paths raise numeric_error (with the best lower bound found) instead of
/// silently overflowing.
template <typename Scalar, typename Derived>
Scalar conjugate(const ConvexFunction<Scalar>& f, const Eigen::MatrixBase<Derived>& y,
                 const ConjugateOptions<Scalar>& opts = {}) {
  const VectorX<Scalar> yv = y;
  require(yv.size() == f.dimension(), "conjugate: dimension mismatch");
  require(yv.allFinite(), "conjugate: y must be finite");
  if (f.capabilities().has_closed_conjugate) return f.conjugate_value(yv);
  if (f.dimension() == 1 && f.capabilities().smooth)
    return detail::conjugate_smooth_1d(f, yv[0], opts).value;
  return detail::conjugate_grid(f, yv, opts).value;
}

/// Grid supremum exposed for oracle-style double conjugation (also used by
/// the anti-selfduality check).
template <typename Scalar, typename Derived>
Scalar grid_conjugate(const ConvexFunction<Scalar>& f, const Eigen::MatrixBase<Derived>& y,
                      const ConjugateOptions<Scalar>& opts = {}) {
  const VectorX<Scalar> yv = y;
  require(yv.size() == f.dimension(), "grid_conjugate: dimension mismatch");
  return detail::conjugate_grid(f, yv, opts).value;
}

namespace detail {

template <typename Scalar>
VectorX<Scalar> numeric_prox_1d(const ConvexFunction<Scalar>& f, Scalar lambda, Scalar x) {
  using Vector = VectorX<Scalar>;
  auto m = [&](Scalar p) {
    Vector pv(1);
    pv[0] = p;
    const Scalar fp = f.value(pv);
    return is_finite(fp) ? fp + (p - x) * (p - x) / (Scalar(2) * lambda)
                         : plus_infinity<Scalar>();
  };
  // expand a bracket around x until the objective grows on both sides
  Scalar w = Scalar(1) + std::abs(x);
  int guard = 0;
  while ((m(x - w) < m(x) || m(x + w) < m(x)) && guard++ < 60) w *= Scalar(2);
  Scalar a = x - w, b = x + w;
  const Scalar gr = Scalar(0.5) * (std::sqrt(Scalar(5)) - Scalar(1));
  Scalar c = b - gr * (b - a), dpt = a + gr * (b - a);
  Scalar fc = m(c), fd = m(dpt);
  for (int it = 0; it < 220 && (b - a) > Scalar(1e-13) * (Scalar(1) + std::abs(x)); ++it) {
    if (fc < fd) {
      b = dpt;
      dpt = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = m(c);
    } else {
      a = c;
      c = dpt;
      fc = fd;
      dpt = a + gr * (b - a);
      fd = m(dpt);
    }
  }
  Vector out(1);
  out[0] = Scalar(0.5) * (a + b);
  if (!is_finite(m(out[0])))
    throw numeric_error("prox: inner 1-D solve failed to locate a finite point",
                        static_cast<double>(m(x)));
  return out;
}

template <typename Scalar>
VectorX<Scalar> numeric_prox_descent(const ConvexFunction<Scalar>& f, Scalar lambda,
                                     const VectorX<Scalar>& x) {
  using Vector = VectorX<Scalar>;
  require(f.capabilities().smooth, "prox: numeric fallback in d > 1 needs a smooth f");
  auto m = [&](const Vector& p) {
    const Scalar fp = f.value(p);
    return is_finite(fp) ? fp + (p - x).squaredNorm() / (Scalar(2) * lambda)
                         : plus_infinity<Scalar>();
  };
  Vector p = x;
  Scalar fp = m(p);
  Scalar step = lambda;
  for (int it = 0; it < 2000; ++it) {
    const Vector g = f.subgradient(p) + (p - x) / lambda;
    const Scalar gn = g.norm();
    if (gn <= Scalar(1e-12) * (Scalar(1) + std::abs(fp))) return p;
    // backtracking on the strongly convex model
    Scalar t = step;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector cand = p - t * g;
      const Scalar fc = m(cand);
      if (fc <= fp - Scalar(0.25) * t * gn * gn) {
        p = cand;
        fp = fc;
        step = t * Scalar(1.5);
        t = Scalar(-1);
        break;
      }
      t *= Scalar(0.5);
    }
    if (t > Scalar(0))
      throw numeric_error("prox: line search stalled", static_cast<double>(fp));
  }
  const Scalar res = (f.subgradient(p) + (p - x) / lambda).norm();
  throw numeric_error("prox: inner solve did not converge, residual " +
                          std::to_string(static_cast<double>(res)),
                      static_cast<double>(res));
}

}  // namespace detail

/// argmin_p { f(p) + |x-p|^2/(2 lambda) }; exact per-builtin formulas when
/// available, numeric inner solve otherwise.
template <typename Scalar, typename Derived>
VectorX<Scalar> prox(const ConvexFunction<Scalar>& f, Scalar lambda,
                     const Eigen::MatrixBase<Derived>& x) {
  const VectorX<Scalar> xv = x;
  require(lambda > Scalar(0), "prox: lambda must be > 0");
  require(xv.size() == f.dimension(), "prox: dimension mismatch");
  if (f.capabilities().prox_exact) return f.prox(lambda, xv);
  if (f.dimension() == 1) return detail::numeric_prox_1d(f, lambda, xv[0]);
  return detail::numeric_prox_descent(f, lambda, xv);
}

}  // namespace sdflow
