#pragma once

#include <iosfwd>
#include <string>

namespace sdflow::cli {

// process exit codes of the solve pipeline
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitCertificateFailure = 2;

/// validate -> resonance_guard -> minimize -> certify -> optional
/// rk4/oracle cross-checks -> trajectory CSV + report JSON.
/// Returns 0 on converged + certificate pass, 2 on certificate failure
/// (outputs still written), 1 on configuration errors (nothing written).
int run_solve(const std::string& config_path, const std::string& traj_override,
              const std::string& report_override, std::ostream& log, std::ostream& err);

/// Runs the verification property suites and prints a pass/fail table.
/// Returns 0 iff every suite passes.
int run_suite(int trials, unsigned seed, std::ostream& log);

}  // namespace sdflow::cli
