#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "config.hpp"
#include "runner.hpp"
#include "sdflow/solver.hpp"

using namespace sdflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("sdflow_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  os << content;
}

int count_lines(const std::string& path) {
  std::ifstream is(path);
  int n = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++n;
  return n;
}

const char* kQuadraticIvp = R"(
# quadratic initial-value flow
[problem]
kind = gradient_flow
T = 1.0
N = 200
d = 1
potential = quadratic
A = 1.0
boundary = initial_value
x0 = 1.0

[solver]
max_iterations = 10000

[output]
rk4_check = true
oracle_check = true
certify_tol = 1e-6
)";

}  // namespace

TEST_CASE("solve pipeline: quadratic IVP exits 0 with full outputs") {
  TempDir tmp;
  const std::string cfg = tmp.file("ivp.cfg");
  write_file(cfg, kQuadraticIvp);
  std::ostringstream log, err;
  const int rc = cli::run_solve(cfg, tmp.file("traj.csv"), tmp.file("report.json"), log, err);
  CHECK(rc == cli::kExitOk);

  // CSV: header + 201 node rows
  CHECK(count_lines(tmp.file("traj.csv")) == 202);

  // report JSON mirrors the solve
  nlohmann::json rep;
  std::ifstream is(tmp.file("report.json"));
  is >> rep;
  CHECK(rep["solve"]["converged"].get<bool>());
  CHECK(rep["solve"]["objective"].get<double>() <= 1e-6);
  CHECK(rep["certificate"]["pass"].get<bool>());
  CHECK(rep["verification"]["rk4_deviation"].get<double>() <= 5e-3);
  CHECK(rep["verification"]["oracle_deviation"].get<double>() <= 5e-3);
}

TEST_CASE("round trip: written trajectory re-loads and re-certifies identically") {
  TempDir tmp;
  const std::string cfg = tmp.file("ivp.cfg");
  write_file(cfg, kQuadraticIvp);
  std::ostringstream log, err;
  REQUIRE(cli::run_solve(cfg, tmp.file("traj.csv"), "", log, err) == cli::kExitOk);

  const auto loaded = cli::parse_config(cfg);
  const Path<double> back = read_csv_file<double>(tmp.file("traj.csv"));
  const auto v1 = certify(loaded.loaded.problem, back, 1e-6);
  CHECK(v1.pass);
  // a second write/read cycle changes nothing at 17 significant digits
  const auto direct = minimize(loaded.loaded.problem, loaded.solver);
  CHECK((back.nodes - direct.path.nodes).norm() == 0.0);
}

TEST_CASE("malformed configs exit 1 and write nothing") {
  TempDir tmp;
  std::ostringstream log, err;

  const std::string missing = tmp.file("missing.cfg");
  CHECK(cli::run_solve(missing, tmp.file("t1.csv"), tmp.file("r1.json"), log, err) ==
        cli::kExitConfigError);
  CHECK(!fs::exists(tmp.file("t1.csv")));
  CHECK(!fs::exists(tmp.file("r1.json")));

  const std::string broken = tmp.file("broken.cfg");
  write_file(broken, "[problem]\nkind = gradient_flow\nT = oops\n");
  CHECK(cli::run_solve(broken, tmp.file("t2.csv"), tmp.file("r2.json"), log, err) ==
        cli::kExitConfigError);
  CHECK(!fs::exists(tmp.file("t2.csv")));

  // unknown potential kind reports the supported catalog
  const std::string unknown = tmp.file("unknown.cfg");
  write_file(unknown,
             "[problem]\nkind = gradient_flow\nT = 1\nN = 10\nd = 1\n"
             "potential = cubic\nboundary = periodic\n");
  std::ostringstream err2;
  CHECK(cli::run_solve(unknown, tmp.file("t3.csv"), tmp.file("r3.json"), log, err2) ==
        cli::kExitConfigError);
  CHECK(err2.str().find("quadratic") != std::string::npos);
  CHECK(!fs::exists(tmp.file("t3.csv")));

  // unknown keys are schema violations
  const std::string typo = tmp.file("typo.cfg");
  write_file(typo,
             "[problem]\nkind = gradient_flow\nT = 1\nN = 10\nd = 1\n"
             "potential = quadratic\nA = 1\nboundary = periodic\nomega = 3\n");
  CHECK(cli::run_solve(typo, "", "", log, err) == cli::kExitConfigError);
}

TEST_CASE("certificate failure exits 2 but still writes the report") {
  TempDir tmp;
  const std::string cfg = tmp.file("tight.cfg");
  write_file(cfg, std::string(kQuadraticIvp) + "\n");
  // make the certificate unachievable by tightening its tolerance
  std::ofstream(cfg, std::ios::app) << "\n";
  std::string text = kQuadraticIvp;
  const auto pos = text.find("certify_tol = 1e-6");
  text.replace(pos, std::string("certify_tol = 1e-6").size(), "certify_tol = 1e-30");
  write_file(cfg, text);

  std::ostringstream log, err;
  const int rc = cli::run_solve(cfg, tmp.file("traj.csv"), tmp.file("report.json"), log, err);
  CHECK(rc == cli::kExitCertificateFailure);
  CHECK(fs::exists(tmp.file("traj.csv")));
  CHECK(fs::exists(tmp.file("report.json")));
  nlohmann::json rep;
  std::ifstream is(tmp.file("report.json"));
  is >> rep;
  CHECK(!rep["certificate"]["pass"].get<bool>());
}

TEST_CASE("resonant Hamiltonian produces a warning and a report, not a crash") {
  TempDir tmp;
  const std::string cfg = tmp.file("resonant.cfg");
  write_file(cfg, R"(
[problem]
kind = hamiltonian_j1
T = 1.0
N = 200
d = 2
potential = quadratic
A = 3.14159265358979323846
boundary = anti_periodic
growth_beta = 3.14159265358979323846

[solver]
max_iterations = 20000
)");
  std::ostringstream log, err;
  const int rc = cli::run_solve(cfg, "", tmp.file("report.json"), log, err);
  CHECK((rc == cli::kExitOk || rc == cli::kExitCertificateFailure));
  CHECK(log.str().find("warning") != std::string::npos);
  nlohmann::json rep;
  std::ifstream is(tmp.file("report.json"));
  is >> rep;
  CHECK(!rep["resonance"]["pass"].get<bool>());
  CHECK(!rep["resonance"]["warning"].get<std::string>().empty());
}

TEST_CASE("second-order config writes the configuration trajectory") {
  TempDir tmp;
  const std::string cfg = tmp.file("so.cfg");
  write_file(cfg, R"(
[problem]
kind = second_order
T = 1.0
N = 100
d = 1
potential = quadratic
A = 1.0
b = 0.3
boundary = periodic
beta = 1.2

[solver]
max_iterations = 20000
)");
  std::ostringstream log, err;
  const int rc = cli::run_solve(cfg, tmp.file("q.csv"), "", log, err);
  CHECK((rc == cli::kExitOk || rc == cli::kExitCertificateFailure));
  const Path<double> q = read_csv_file<double>(tmp.file("q.csv"));
  CHECK(q.grid.d == 1);  // configuration dimension, not the phase dimension
  // -qddot = q + 0.3 with periodic data: q is the constant -0.3
  CHECK(std::abs(q.nodes(0, 50) + 0.3) <= 1e-3);
}

TEST_CASE("suite subcommand prints a pass table and exits 0") {
  std::ostringstream log;
  const int rc = cli::run_suite(25, 7u, log);
  CHECK(rc == 0);
  CHECK(log.str().find("wirtinger") != std::string::npos);
  CHECK(log.str().find("symplectic_bound") != std::string::npos);
  CHECK(log.str().find("FAIL") == std::string::npos);
  // the JSON block carries the report schema
  CHECK(log.str().find("worst_slack") != std::string::npos);
  CHECK(log.str().find("allowance") != std::string::npos);
}

TEST_CASE("config vector and matrix grammars") {
  TempDir tmp;
  const std::string cfg = tmp.file("mat.cfg");
  write_file(cfg, R"(
[problem]
kind = gradient_flow
T = 0.5
N = 20
d = 2
potential = quadratic
A = 1.0, 2.0        # diagonal
b = 0.1, -0.2
boundary = initial_value
x0 = 0.3, 0.7
)");
  const auto parsed = cli::parse_config(cfg);
  const auto f = parsed.loaded.problem.phi.at(0.0);
  VectorX<double> x(2);
  x << 1.0, 1.0;
  CHECK(f.value(x) == doctest::Approx(0.5 * (1.0 + 2.0) + 0.1 - 0.2));
  CHECK(parsed.loaded.problem.boundary.anchor[1] == doctest::Approx(0.7));

  // full matrix rows with semicolons
  write_file(cfg, R"(
[problem]
kind = gradient_flow
T = 0.5
N = 20
d = 2
potential = quadratic
A = 2.0, 0.5; 0.5, 1.0
boundary = periodic
)");
  const auto parsed2 = cli::parse_config(cfg);
  const auto f2 = parsed2.loaded.problem.phi.at(0.0);
  CHECK(f2.value(x) == doctest::Approx(0.5 * (2.0 + 0.5 + 0.5 + 1.0)));
}
