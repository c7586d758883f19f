#include "runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <json.hpp>

#include "config.hpp"
#include "sdflow/verify.hpp"

namespace sdflow::cli {

namespace {

using nlohmann::json;

json finite_or_string(double v) {
  if (sdflow::is_finite(v)) return json(v);
  return json(v > 0 ? "inf" : "-inf");
}

void check_writable(const std::string& path) {
  if (path.empty()) return;
  namespace fs = std::filesystem;
  const fs::path p(path);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  require(fs::exists(dir) && fs::is_directory(dir),
          "config: output directory '" + dir.string() + "' does not exist");
}

void write_trajectory_csv(const std::string& path, const Path<double>& p,
                          const VectorX<double>& interval_residuals) {
  std::ofstream os(path);
  require(os.good(), "cannot open trajectory file '" + path + "'");
  os << "t";
  for (Eigen::Index j = 0; j < p.grid.d; ++j) os << ",x" << (j + 1);
  os << ",residual\n";
  char buf[40];
  for (int i = 0; i <= p.grid.N; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.grid.node_time(i));
    os << buf;
    for (Eigen::Index j = 0; j < p.grid.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", p.nodes(j, i));
      os << "," << buf;
    }
    if (i < p.grid.N) {
      std::snprintf(buf, sizeof(buf), "%.17g", interval_residuals[i]);
      os << "," << buf;
    } else {
      os << ",";  // last row: no interval to the right
    }
    os << "\n";
  }
}

json report_json(const RunConfig& cfg, const SolveReport<double>& rep,
                 const CertificateVerdict<double>& cert,
                 const std::optional<ResonanceAdvisory<double>>& resonance, double rk4_dev,
                 double oracle_dev, double oracle_acc, double runtime_ms) {
  const auto& prob = cfg.loaded.problem;
  json j;
  j["problem"] = {{"kind", cfg.loaded.kind_string},
                  {"T", prob.grid.T},
                  {"N", prob.grid.N},
                  {"d", static_cast<int>(prob.grid.d)},
                  {"boundary", to_string(prob.boundary.kind)}};
  json trace = json::array();
  for (const auto& st : rep.schedule_trace)
    trace.push_back({{"epsilon", st.epsilon},
                     {"lambda", st.lambda},
                     {"objective", finite_or_string(st.objective)},
                     {"iterations", st.iterations}});
  json residuals = json::array();
  for (Eigen::Index i = 0; i < rep.interval_residuals.size(); ++i)
    residuals.push_back(finite_or_string(rep.interval_residuals[i]));
  j["solve"] = {{"objective", finite_or_string(rep.objective)},
                {"converged", rep.converged},
                {"iterations", rep.iterations},
                {"stationarity", finite_or_string(rep.stationarity)},
                {"boundary_residual", finite_or_string(rep.boundary_residual)},
                {"method", rep.method_used},
                {"residuals_regularized", rep.residuals_regularized},
                {"schedule_trace", trace},
                {"interval_residuals", residuals}};
  j["certificate"] = {{"pass", cert.pass},
                      {"tol", cert.tol},
                      {"interval_budget", cert.interval_budget},
                      {"max_interval_residual", finite_or_string(cert.max_interval_residual)},
                      {"worst_interval", cert.worst_interval},
                      {"boundary_residual", finite_or_string(cert.boundary_residual)}};
  if (resonance) {
    j["resonance"] = {{"pass", resonance->pass},
                      {"beta", resonance->beta},
                      {"limit", resonance->limit},
                      {"warning", resonance->message}};
  }
  json ver;
  if (rk4_dev >= 0) ver["rk4_deviation"] = rk4_dev;
  if (oracle_dev >= 0) {
    ver["oracle_deviation"] = oracle_dev;
    ver["oracle_accuracy_estimate"] = oracle_acc;
  }
  if (!ver.empty()) j["verification"] = ver;
  j["runtime_ms"] = runtime_ms;
  return j;
}

}  // namespace

int run_solve(const std::string& config_path, const std::string& traj_override,
              const std::string& report_override, std::ostream& log, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = parse_config(config_path);
    if (!traj_override.empty()) cfg.output.trajectory = traj_override;
    if (!report_override.empty()) cfg.output.report = report_override;
    check_writable(cfg.output.trajectory);
    check_writable(cfg.output.report);
    validate(cfg.loaded.problem);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  const auto& prob = cfg.loaded.problem;

  std::optional<ResonanceAdvisory<double>> resonance;
  if (prob.kind != FlowKind::GradientFlow) {
    resonance = resonance_guard(prob);
    if (!resonance->pass) log << "warning: " << resonance->message << "\n";
  }

  const auto t_start = std::chrono::steady_clock::now();
  SolveReport<double> rep;
  try {
    rep = minimize(prob, cfg.solver);
  } catch (const std::exception& e) {
    err << "error: solve failed: " << e.what() << "\n";
    return kExitConfigError;
  }
  const double runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count();

  const CertificateVerdict<double> cert = certify(prob, rep.path, cfg.output.certify_tol);

  double rk4_dev = -1, oracle_dev = -1, oracle_acc = -1;
  if (cfg.output.rk4_check) {
    try {
      rk4_dev = rk4_crosscheck(prob, rep.path);
    } catch (const std::exception& e) {
      log << "warning: rk4 cross-check unavailable: " << e.what() << "\n";
    }
  }
  if (cfg.output.oracle_check) {
    if (cfg.loaded.oracle_available) {
      try {
        const auto oracle = linear_flow_oracle(
            cfg.loaded.oracle_A, cfg.loaded.oracle_f, prob.boundary, prob.grid,
            prob.kind == FlowKind::GradientFlow ? LinearFlowKind::Gradient
                                                : LinearFlowKind::Hamiltonian);
        oracle_dev = (oracle.path.nodes - rep.path.nodes).template lpNorm<Eigen::Infinity>();
        oracle_acc = oracle.accuracy_estimate;
      } catch (const std::exception& e) {
        log << "warning: oracle comparison unavailable: " << e.what() << "\n";
      }
    } else {
      log << "warning: oracle comparison needs a quadratic potential\n";
    }
  }

  try {
    if (!cfg.output.trajectory.empty()) {
      if (cfg.loaded.reduction) {
        // write the configuration path q(t); residuals are the phase ones
        Path<double> q(PathGrid<double>(prob.grid.T, prob.grid.N, cfg.loaded.reduction->config_dim),
                       cfg.loaded.reduction->extract_q(rep.path));
        write_trajectory_csv(cfg.output.trajectory, q, rep.interval_residuals);
      } else {
        write_trajectory_csv(cfg.output.trajectory, rep.path, rep.interval_residuals);
      }
    }
    if (!cfg.output.report.empty()) {
      std::ofstream os(cfg.output.report);
      require(os.good(), "cannot open report file '" + cfg.output.report + "'");
      os << report_json(cfg, rep, cert, resonance, rk4_dev, oracle_dev, oracle_acc, runtime_ms)
                .dump(2)
         << "\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  log << "objective " << rep.objective << "  converged " << (rep.converged ? "yes" : "no")
      << "  certificate " << (cert.pass ? "pass" : "fail") << "  iterations " << rep.iterations
      << "  runtime " << std::fixed << std::setprecision(1) << runtime_ms << " ms\n";

  return (rep.converged && cert.pass) ? kExitOk : kExitCertificateFailure;
}

int run_suite(int trials, unsigned seed, std::ostream& log) {
  require(trials >= 1, "suite: trials must be >= 1");
  const PathGrid<double> grid1(1.0, 2000, 1);
  const PathGrid<double> grid2(1.0, 2000, 2);

  std::vector<SuiteReport<double>> reports;
  reports.push_back(wirtinger_suite(grid1, trials, seed));
  reports.push_back(symplectic_bound_suite(grid2, trials, seed + 1));

  bool all_pass = true;
  log << std::left << std::setw(20) << "suite" << std::setw(8) << "trials" << std::setw(14)
      << "worst_slack" << std::setw(14) << "allowance" << std::setw(14) << "extremal_gap"
      << "result\n";
  json jout = json::array();
  for (const auto& r : reports) {
    all_pass = all_pass && r.pass;
    log << std::left << std::setw(20) << r.suite << std::setw(8) << r.trials << std::setw(14)
        << std::setprecision(3) << std::scientific << r.worst_slack << std::setw(14)
        << r.allowance << std::setw(14) << r.extremal_gap
        << (r.pass ? "PASS" : "FAIL") << "\n";
    jout.push_back({{"suite", r.suite},
                    {"trials", r.trials},
                    {"worst_slack", r.worst_slack},
                    {"location", r.location},
                    {"allowance", r.allowance}});
  }
  log << jout.dump(2) << "\n";
  return all_pass ? 0 : 1;
}

}  // namespace sdflow::cli
