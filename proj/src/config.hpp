#pragma once

#include <functional>
#include <optional>
#include <string>

#include "sdflow/lagrangians.hpp"
#include "sdflow/solver.hpp"

namespace sdflow::cli {

struct OutputConfig {
  std::string trajectory;
  std::string report;
  bool rk4_check = false;
  bool oracle_check = false;
  double certify_tol = 1e-6;
};

/// Problem as loaded from a config file. For second_order runs `reduction`
/// carries the phase-space lift and `problem` is its Hamiltonian form.
struct LoadedProblem {
  Problem<double> problem;
  std::optional<SecondOrderReduction<double>> reduction;
  std::string kind_string;

  // linear-flow oracle data, available for quadratic potentials
  bool oracle_available = false;
  MatrixX<double> oracle_A;
  std::function<VectorX<double>(double)> oracle_f;
};

struct RunConfig {
  LoadedProblem loaded;
  SolverOptions<double> solver;
  OutputConfig output;
};

/// Parses the sectioned key/value config file; throws contract_violation
/// with a readable message on any schema or catalog violation. No numerics
/// run before the whole file validates.
RunConfig parse_config(const std::string& path);

}  // namespace sdflow::cli
