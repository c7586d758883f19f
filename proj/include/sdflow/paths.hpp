#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sdflow/core.hpp"

namespace sdflow {

/// Uniform discretization of [0, T] into N intervals for paths in R^d.
template <typename Scalar = double>
struct PathGrid {
  Scalar T = Scalar(1);
  int N = 2;
  Eigen::Index d = 1;

  PathGrid() = default;
  PathGrid(Scalar horizon, int intervals, Eigen::Index dim)
      : T(horizon), N(intervals), d(dim) {
    require(T > Scalar(0), "PathGrid: T must be > 0");
    require(N >= 2, "PathGrid: N must be >= 2");
    require(d >= 1, "PathGrid: d must be >= 1");
  }

  Scalar h() const { return T / Scalar(N); }
  Scalar node_time(int i) const { return T * Scalar(i) / Scalar(N); }
  Scalar midpoint_time(int i) const { return T * (Scalar(i) + Scalar(0.5)) / Scalar(N); }

  bool operator==(const PathGrid& o) const { return T == o.T && N == o.N && d == o.d; }
};

using PathGridd = PathGrid<double>;

/// Piecewise-linear path: node values x(t_i) stored column-wise in a
/// d x (N+1) matrix. The optimization variable of every functional.
template <typename Scalar = double>
struct Path {
  PathGrid<Scalar> grid;
  MatrixX<Scalar> nodes;

  Path() = default;
  Path(PathGrid<Scalar> g, MatrixX<Scalar> values) : grid(g), nodes(std::move(values)) {
    require(nodes.rows() == grid.d && nodes.cols() == grid.N + 1,
            "Path: nodes must be d x (N+1)");
    require(nodes.allFinite(), "Path: all node values must be finite");
  }

  static Path zero(const PathGrid<Scalar>& g) {
    return Path(g, MatrixX<Scalar>::Zero(g.d, g.N + 1));
  }
  static Path constant(const PathGrid<Scalar>& g, const VectorX<Scalar>& c) {
    require(c.size() == g.d, "Path::constant: dimension mismatch");
    MatrixX<Scalar> m(g.d, g.N + 1);
    m.colwise() = c;
    return Path(g, std::move(m));
  }

  VectorX<Scalar> node(int i) const { return nodes.col(i); }
};

using Pathd = Path<double>;

/// Per-interval constants v_i = (x_{i+1} - x_i)/h of the piecewise-linear
/// derivative, as a d x N matrix.
template <typename Scalar>
MatrixX<Scalar> derivative(const Path<Scalar>& p) {
  const int N = p.grid.N;
  return (p.nodes.rightCols(N) - p.nodes.leftCols(N)) / p.grid.h();
}

/// Path-space norm  sqrt( |(x_0+x_N)/2|^2 + sum_i h |v_i|^2 ).
template <typename Scalar>
Scalar a2_norm(const Path<Scalar>& p) {
  const int N = p.grid.N;
  const VectorX<Scalar> mean = Scalar(0.5) * (p.nodes.col(0) + p.nodes.col(N));
  const MatrixX<Scalar> v = derivative(p);
  return std::sqrt(mean.squaredNorm() + p.grid.h() * v.squaredNorm());
}

/// Discrete integral of <x, xdot>, exact for piecewise-linear paths via the
/// midpoint form; telescopes to |x_N|^2/2 - |x_0|^2/2.
template <typename Scalar>
Scalar cross_term(const Path<Scalar>& p) {
  const int N = p.grid.N;
  Scalar total = Scalar(0);
  for (int i = 0; i < N; ++i) {
    const VectorX<Scalar> mid = Scalar(0.5) * (p.nodes.col(i) + p.nodes.col(i + 1));
    total += mid.dot(p.nodes.col(i + 1) - p.nodes.col(i));
  }
  return total;
}

/// Discrete form of  int <J xdot, x> dt + <J (x_0+x_N)/2, x_N - x_0>,
/// exact for piecewise-linear paths: the interval integrand is linear in t
/// because <J v_i, v_i> = 0.
template <typename Scalar>
Scalar symplectic_cross_term(const Path<Scalar>& p) {
  const int N = p.grid.N;
  require(p.grid.d % 2 == 0, "symplectic_cross_term: d must be even");
  Scalar total = Scalar(0);
  for (int i = 0; i < N; ++i) {
    const VectorX<Scalar> dx = p.nodes.col(i + 1) - p.nodes.col(i);
    const VectorX<Scalar> mid = Scalar(0.5) * (p.nodes.col(i) + p.nodes.col(i + 1));
    total += apply_J(dx).dot(mid);  // = h <J v_i, m_i>
  }
  const VectorX<Scalar> mean = Scalar(0.5) * (p.nodes.col(0) + p.nodes.col(N));
  total += apply_J(mean).dot(p.nodes.col(N) - p.nodes.col(0));
  return total;
}

/// One real Fourier mode of an anti-periodic path: index k >= 1 selects the
/// cosine mode cos((2k-1) pi t / T), k <= -1 the sine mode of frequency
/// (2|k|-1) pi / T. These are the +/-k pairings of exp((2k-1) i pi t / T).
template <typename Scalar = double>
struct AntiperiodicMode {
  int k = 1;
  VectorX<Scalar> amplitude;
};

/// Samples a finite anti-periodic trigonometric sum at the grid nodes.
/// The end node is pinned to -x_0, so x_N = -x_0 holds exactly.
template <typename Scalar>
Path<Scalar> antiperiodic_sample(const PathGrid<Scalar>& grid,
                                 const std::vector<AntiperiodicMode<Scalar>>& modes) {
  MatrixX<Scalar> nodes = MatrixX<Scalar>::Zero(grid.d, grid.N + 1);
  for (const auto& mode : modes) {
    require(mode.k != 0, "antiperiodic_sample: mode index must be nonzero");
    require(mode.amplitude.size() == grid.d, "antiperiodic_sample: amplitude dimension mismatch");
    const int m = std::abs(mode.k);
    const Scalar omega = Scalar(2 * m - 1) * Scalar(EIGEN_PI) / grid.T;
    for (int i = 0; i <= grid.N; ++i) {
      const Scalar angle = omega * grid.node_time(i);
      const Scalar w = (mode.k > 0) ? std::cos(angle) : std::sin(angle);
      nodes.col(i) += w * mode.amplitude;
    }
  }
  nodes.col(grid.N) = -nodes.col(0);
  return Path<Scalar>(grid, std::move(nodes));
}

/// Exact continuum values of int |u|^2 dt and int |udot|^2 dt for an
/// anti-periodic trigonometric sum (Parseval; the mode family is
/// orthogonal over [0, T]).
template <typename Scalar>
std::pair<Scalar, Scalar> antiperiodic_parseval(const std::vector<AntiperiodicMode<Scalar>>& modes,
                                                Scalar T) {
  Scalar l2 = Scalar(0), deriv = Scalar(0);
  for (const auto& mode : modes) {
    const int m = std::abs(mode.k);
    const Scalar omega = Scalar(2 * m - 1) * Scalar(EIGEN_PI) / T;
    const Scalar e = Scalar(0.5) * T * mode.amplitude.squaredNorm();
    l2 += e;
    deriv += omega * omega * e;
  }
  return {l2, deriv};
}

// ---------------------------------------------------------------------------
// CSV serialization: header `t,x1,...,xd`, one row per node, 17 significant
// digits. Readers ignore any extra trailing columns (e.g. residuals).
// ---------------------------------------------------------------------------

template <typename Scalar>
void write_csv(const Path<Scalar>& p, std::ostream& os) {
  os << "t";
  for (Eigen::Index j = 0; j < p.grid.d; ++j) os << ",x" << (j + 1);
  os << "\n";
  char buf[40];
  for (int i = 0; i <= p.grid.N; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(p.grid.node_time(i)));
    os << buf;
    for (Eigen::Index j = 0; j < p.grid.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(p.nodes(j, i)));
      os << "," << buf;
    }
    os << "\n";
  }
}

template <typename Scalar>
void write_csv(const Path<Scalar>& p, const std::string& filename) {
  std::ofstream os(filename);
  require(os.good(), "write_csv: cannot open " + filename);
  write_csv(p, os);
}

template <typename Scalar>
Path<Scalar> read_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "read_csv: empty stream");
  std::vector<int> state_cols;
  {
    std::stringstream header(line);
    std::string cell;
    int col = 0;
    bool have_t = false;
    while (std::getline(header, cell, ',')) {
      if (col == 0) {
        require(cell == "t", "read_csv: first column must be t");
        have_t = true;
      } else if (cell.size() > 1 && cell[0] == 'x') {
        state_cols.push_back(col);
      }
      ++col;
    }
    require(have_t && !state_cols.empty(), "read_csv: header must be t,x1,...,xd");
  }
  const Eigen::Index d = static_cast<Eigen::Index>(state_cols.size());

  std::vector<double> times;
  std::vector<VectorX<Scalar>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    std::size_t next_state = 0;
    VectorX<Scalar> x(d);
    double t = 0;
    while (std::getline(ss, cell, ',')) {
      if (col == 0) {
        t = std::stod(cell);
      } else if (next_state < state_cols.size() && col == state_cols[next_state]) {
        x[static_cast<Eigen::Index>(next_state)] = static_cast<Scalar>(std::stod(cell));
        ++next_state;
      }
      ++col;
    }
    require(next_state == state_cols.size(), "read_csv: short row");
    times.push_back(t);
    rows.push_back(std::move(x));
  }
  require(rows.size() >= 3, "read_csv: need at least 3 nodes");
  const int N = static_cast<int>(rows.size()) - 1;
  const Scalar T = static_cast<Scalar>(times.back());
  PathGrid<Scalar> grid(T, N, d);
  for (int i = 0; i <= N; ++i)
    require(std::abs(times[static_cast<std::size_t>(i)] -
                     static_cast<double>(grid.node_time(i))) <= 1e-9 * static_cast<double>(T),
            "read_csv: non-uniform time grid");
  MatrixX<Scalar> nodes(d, N + 1);
  for (int i = 0; i <= N; ++i) nodes.col(i) = rows[static_cast<std::size_t>(i)];
  return Path<Scalar>(grid, std::move(nodes));
}

template <typename Scalar>
Path<Scalar> read_csv_file(const std::string& filename) {
  std::ifstream is(filename);
  require(is.good(), "read_csv: cannot open " + filename);
  return read_csv<Scalar>(is);
}

}  // namespace sdflow
