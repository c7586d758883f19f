#pragma once

// Test-side oracles, independent of the library's conjugation and solve
// paths: brute-force grid suprema/infima, finite differences, and rotation
// matrices for the 2x2 closed-form checks.

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace oracle {

/// sup over x in [lo, hi] (fixed step) of x*y - f(x); +inf f values skipped.
inline double grid_sup_conjugate_1d(const std::function<double(double)>& f, double y, double lo,
                                    double hi, double step) {
  double best = -std::numeric_limits<double>::infinity();
  for (double x = lo; x <= hi; x += step) {
    const double fx = f(x);
    if (!std::isfinite(fx)) continue;
    best = std::max(best, x * y - fx);
  }
  return best;
}

/// inf over z in [lo, hi] of f(z) + (x-z)^2 / (2 lambda).
inline double grid_inf_moreau_1d(const std::function<double(double)>& f, double lambda, double x,
                                 double lo, double hi, double step) {
  double best = std::numeric_limits<double>::infinity();
  for (double z = lo; z <= hi; z += step) {
    const double fz = f(z);
    if (!std::isfinite(fz)) continue;
    best = std::min(best, fz + (x - z) * (x - z) / (2.0 * lambda));
  }
  return best;
}

/// sup over p in [lo, hi]^1 of y*p - L(x, p), the 1-D Hamiltonian oracle.
inline double grid_sup_hamiltonian_1d(const std::function<double(double, double)>& L, double x,
                                      double y, double lo, double hi, double step) {
  double best = -std::numeric_limits<double>::infinity();
  for (double p = lo; p <= hi; p += step) {
    const double Lxp = L(x, p);
    if (!std::isfinite(Lxp)) continue;
    best = std::max(best, y * p - Lxp);
  }
  return best;
}

/// central finite-difference gradient of a scalar function of a flat vector
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& z, double delta = 1e-6) {
  Eigen::VectorXd g(z.size());
  Eigen::VectorXd zp = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double keep = z[i];
    zp[i] = keep + delta;
    const double fp = f(zp);
    zp[i] = keep - delta;
    const double fm = f(zp);
    zp[i] = keep;
    g[i] = (fp - fm) / (2.0 * delta);
  }
  return g;
}

/// planar rotation by angle a
inline Eigen::Matrix2d rotation(double a) {
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

}  // namespace oracle
