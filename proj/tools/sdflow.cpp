#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "runner.hpp"

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("SDFLOW_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) Eigen::setNbThreads(n);
  }

  CLI::App app{"selfdual variational solver for gradient flows and Hamiltonian systems"};
  app.require_subcommand(1);

  std::string config_path, traj_path, report_path;
  CLI::App* solve = app.add_subcommand("solve", "solve a problem described by a config file");
  solve->add_option("--config", config_path, "problem config file")->required();
  solve->add_option("--out-traj", traj_path, "trajectory CSV (overrides [output] trajectory)");
  solve->add_option("--out-report", report_path, "report JSON (overrides [output] report)");

  int trials = 200;
  unsigned seed = 2024;
  CLI::App* suite = app.add_subcommand("suite", "run the verification property suites");
  suite->add_option("--trials", trials, "random trials per suite");
  suite->add_option("--seed", seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return sdflow::cli::run_solve(config_path, traj_path, report_path, std::cout, std::cerr);
    return sdflow::cli::run_suite(trials, seed, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sdflow::cli::kExitConfigError;
  }
}
