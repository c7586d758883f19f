#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace sdflow::cli {

namespace {

using Vec = VectorX<double>;
using Mat = MatrixX<double>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Section {
  std::map<std::string, std::string> kv;
  std::set<std::string> consumed;

  bool has(const std::string& key) const { return kv.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    consumed.insert(key);
    return it->second;
  }

  std::string get_or_fail(const std::string& key, const std::string& section) {
    auto v = get(key);
    require(v.has_value(), "config: missing key '" + key + "' in section [" + section + "]");
    return *v;
  }
};

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    require(trim(s.substr(pos)).empty(), "config: trailing characters in " + what);
    return v;
  } catch (const contract_violation&) {
    throw;
  } catch (...) {
    throw contract_violation("config: cannot parse number '" + s + "' for " + what);
  }
}

int parse_int(const std::string& s, const std::string& what) {
  const double v = parse_double(s, what);
  require(v == static_cast<double>(static_cast<long long>(v)),
          "config: expected an integer for " + what);
  return static_cast<int>(v);
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw contract_violation("config: expected true/false for " + what + ", got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(parse_double(cell, what));
  }
  require(!out.empty(), "config: empty list for " + what);
  return out;
}

/// scalar -> broadcast, comma list of length d -> as-is
Vec parse_vector(const std::string& s, Eigen::Index d, const std::string& what) {
  const std::vector<double> vals = parse_list(s, what);
  Vec out(d);
  if (vals.size() == 1) {
    out.setConstant(vals[0]);
  } else {
    require(static_cast<Eigen::Index>(vals.size()) == d,
            "config: " + what + " needs 1 or " + std::to_string(d) + " entries, got " +
                std::to_string(vals.size()));
    for (Eigen::Index i = 0; i < d; ++i) out[i] = vals[static_cast<std::size_t>(i)];
  }
  return out;
}

/// scalar -> s*I, comma list -> diagonal, semicolon rows -> full matrix
Mat parse_matrix(const std::string& s, Eigen::Index d, const std::string& what) {
  if (s.find(';') != std::string::npos) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(s);
    std::string row;
    while (std::getline(ss, row, ';')) {
      row = trim(row);
      if (!row.empty()) rows.push_back(parse_list(row, what));
    }
    require(static_cast<Eigen::Index>(rows.size()) == d, "config: " + what + " needs " +
                                                             std::to_string(d) + " rows");
    Mat out(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == d,
              "config: " + what + " row length mismatch");
      for (Eigen::Index j = 0; j < d; ++j)
        out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return out;
  }
  const std::vector<double> vals = parse_list(s, what);
  if (vals.size() == 1) return vals[0] * Mat::Identity(d, d);
  require(static_cast<Eigen::Index>(vals.size()) == d,
          "config: " + what + " needs 1, d, or d;d entries");
  Mat out = Mat::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) out(i, i) = vals[static_cast<std::size_t>(i)];
  return out;
}

std::map<std::string, Section> parse_ini(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "config: cannot open '" + path + "'");
  std::map<std::string, Section> sections;
  std::string line, current = "";
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', "config: malformed section header at line " +
                                      std::to_string(lineno));
      current = trim(line.substr(1, line.size() - 2));
      require(!current.empty(), "config: empty section name at line " + std::to_string(lineno));
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "config: expected key = value at line " + std::to_string(lineno));
    require(!current.empty(), "config: key outside any section at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    require(!key.empty() && !val.empty(),
            "config: empty key or value at line " + std::to_string(lineno));
    require(sections[current].kv.emplace(key, val).second,
            "config: duplicate key '" + key + "' at line " + std::to_string(lineno));
  }
  return sections;
}

/// forcing sampler f(t) per the forcing keys of [problem]
std::function<Vec(double)> parse_forcing(Section& sec, Eigen::Index d, double T) {
  const std::string kind = sec.get("forcing").value_or("none");
  if (kind == "none") return nullptr;
  if (kind == "constant") {
    const Vec v = parse_vector(sec.get_or_fail("forcing_value", "problem"), d, "forcing_value");
    return [v](double) { return v; };
  }
  if (kind == "sinusoid") {
    const Vec amp =
        parse_vector(sec.get_or_fail("forcing_amplitude", "problem"), d, "forcing_amplitude");
    const double freq =
        parse_double(sec.get_or_fail("forcing_frequency", "problem"), "forcing_frequency");
    const double phase = parse_double(sec.get("forcing_phase").value_or("0"), "forcing_phase");
    return [amp, freq, phase](double t) {
      return Vec(amp * std::sin(2.0 * EIGEN_PI * freq * t + phase));
    };
  }
  if (kind == "table") {
    // rows "t v1 ... vd" separated by ';', linear interpolation in t
    const std::string table = sec.get_or_fail("forcing_table", "problem");
    std::vector<double> ts;
    std::vector<Vec> vs;
    std::stringstream ss(table);
    std::string row;
    while (std::getline(ss, row, ';')) {
      row = trim(row);
      if (row.empty()) continue;
      std::stringstream rs(row);
      double t;
      rs >> t;
      Vec v(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        require(static_cast<bool>(rs >> v[i]), "config: short forcing_table row");
      }
      require(ts.empty() || t > ts.back(), "config: forcing_table times must increase");
      ts.push_back(t);
      vs.push_back(v);
    }
    require(ts.size() >= 2, "config: forcing_table needs at least two rows");
    require(ts.front() <= 0.0 && ts.back() >= T, "config: forcing_table must cover [0, T]");
    return [ts, vs](double t) {
      auto it = std::upper_bound(ts.begin(), ts.end(), t);
      if (it == ts.begin()) return vs.front();
      if (it == ts.end()) return vs.back();
      const auto hi = static_cast<std::size_t>(it - ts.begin());
      const auto lo = hi - 1;
      const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
      return Vec((1.0 - w) * vs[lo] + w * vs[hi]);
    };
  }
  throw contract_violation("config: unknown forcing kind '" + kind +
                           "'; supported: none, constant, sinusoid, table");
}

BoundaryCondition<double> parse_boundary(Section& sec, Eigen::Index d) {
  const std::string kind = sec.get_or_fail("boundary", "problem");
  if (kind == "initial_value")
    return initial_value_boundary(parse_vector(sec.get_or_fail("x0", "problem"), d, "x0"));
  if (kind == "periodic") return periodic_boundary<double>(d);
  if (kind == "anti_periodic") return antiperiodic_boundary<double>(d);
  if (kind == "skew_periodic") return skew_periodic_boundary<double>(d);
  if (kind == "convex_set_gap") {
    const std::string set = sec.get_or_fail("gap_set", "problem");
    if (set == "point")
      return convex_set_gap_boundary(
          indicator_point(parse_vector(sec.get_or_fail("gap_point", "problem"), d, "gap_point")));
    if (set == "box")
      return convex_set_gap_boundary(
          indicator_box(parse_vector(sec.get_or_fail("gap_lo", "problem"), d, "gap_lo"),
                        parse_vector(sec.get_or_fail("gap_hi", "problem"), d, "gap_hi")));
    if (set == "ball")
      return convex_set_gap_boundary(indicator_ball(
          parse_vector(sec.get("gap_center").value_or("0"), d, "gap_center"),
          parse_double(sec.get_or_fail("gap_radius", "problem"), "gap_radius")));
    throw contract_violation("config: unknown gap_set '" + set +
                             "'; supported: point, box, ball");
  }
  throw contract_violation("config: unknown boundary '" + kind +
                           "'; supported: initial_value, periodic, anti_periodic, "
                           "skew_periodic, convex_set_gap");
}

void check_unknown_keys(const std::map<std::string, Section>& sections) {
  for (const auto& [name, sec] : sections) {
    require(name == "problem" || name == "solver" || name == "output",
            "config: unknown section [" + name + "]");
    for (const auto& [key, value] : sec.kv)
      require(sec.consumed.count(key) > 0,
              "config: unknown key '" + key + "' in section [" + name + "]");
  }
}

}  // namespace

RunConfig parse_config(const std::string& path) {
  auto sections = parse_ini(path);
  require(sections.count("problem") > 0, "config: missing [problem] section");
  Section& prob = sections["problem"];

  RunConfig cfg;
  const std::string kind = prob.get_or_fail("kind", "problem");
  cfg.loaded.kind_string = kind;

  const double T = parse_double(prob.get_or_fail("T", "problem"), "T");
  const int N = parse_int(prob.get_or_fail("N", "problem"), "N");
  const auto d = static_cast<Eigen::Index>(parse_int(prob.get_or_fail("d", "problem"), "d"));
  require(T > 0 && N >= 2 && d >= 1, "config: need T > 0, N >= 2, d >= 1");
  const PathGrid<double> grid(T, N, d);

  // potential
  const std::string pot = prob.get_or_fail("potential", "problem");
  std::function<Vec(double)> forcing = parse_forcing(prob, d, T);
  TimeConvexFunction<double> phi;
  if (pot == "quadratic") {
    const Mat A = parse_matrix(prob.get("A").value_or("0"), d, "A");
    const Vec b = parse_vector(prob.get("b").value_or("0"), d, "b");
    const double c = parse_double(prob.get("c").value_or("0"), "c");
    QuadraticFamily<double> family(A);
    if (forcing) {
      phi = TimeConvexFunction<double>(T, d, [family, b, c, forcing](double t) {
        return family(Vec(b + forcing(t)), c);
      });
    } else {
      phi = TimeConvexFunction<double>::constant(T, family(b, c));
    }
    cfg.loaded.oracle_available = true;
    cfg.loaded.oracle_A = A;
    cfg.loaded.oracle_f = forcing ? std::function<Vec(double)>([b, forcing](double t) {
      return Vec(b + forcing(t));
    })
                                  : std::function<Vec(double)>([b](double) { return b; });
  } else if (pot == "scaled_sqnorm") {
    const double sigma = parse_double(prob.get_or_fail("sigma", "problem"), "sigma");
    require(!forcing, "config: scaled_sqnorm takes no forcing (use potential = quadratic)");
    phi = TimeConvexFunction<double>::constant(T, scaled_squared_norm(sigma, d));
  } else if (pot == "scaled_l1") {
    const double s = parse_double(prob.get_or_fail("scale", "problem"), "scale");
    require(!forcing, "config: scaled_l1 takes no forcing");
    phi = TimeConvexFunction<double>::constant(T, scaled_l1(s, d));
  } else if (pot == "zero") {
    require(!forcing, "config: zero potential takes no forcing");
    phi = TimeConvexFunction<double>::constant(T, zero_function<double>(d));
  } else {
    throw contract_violation("config: unknown potential kind '" + pot +
                             "'; supported: quadratic, scaled_sqnorm, scaled_l1, zero");
  }

  // growth bounds
  std::optional<GrowthBounds<double>> growth;
  if (prob.has("growth_beta")) {
    GrowthBounds<double> g;
    g.beta = parse_double(prob.get_or_fail("growth_beta", "problem"), "growth_beta");
    g.alpha_bar = parse_double(prob.get("growth_alpha").value_or("0"), "growth_alpha");
    g.gamma_bar = parse_double(prob.get("growth_gamma").value_or("0"), "growth_gamma");
    require(g.beta > 0, "config: growth_beta must be > 0");
    growth = g;
  }

  // assemble the problem
  if (kind == "gradient_flow") {
    cfg.loaded.problem = gradient_flow_problem(phi, parse_boundary(prob, d), grid, growth);
  } else if (kind == "hamiltonian_j1" || kind == "hamiltonian_j2") {
    require(growth.has_value(), "config: Hamiltonian kinds need growth_beta");
    cfg.loaded.problem = hamiltonian_problem(
        kind == "hamiltonian_j1" ? FlowKind::HamiltonianJ1 : FlowKind::HamiltonianJ2, phi,
        parse_boundary(prob, d), grid, *growth);
  } else if (kind == "second_order") {
    const double beta = parse_double(prob.get_or_fail("beta", "problem"), "beta");
    const std::string bnd = prob.get_or_fail("boundary", "problem");
    ConvexFunction<double> psi1, psi2;
    if (bnd == "periodic") {
      psi1 = indicator_point(Vec::Zero(d));
      psi2 = psi1;
    } else if (bnd == "anti_periodic") {
      psi1 = zero_function<double>(d);
      psi2 = psi1;
    } else {
      throw contract_violation("config: second_order supports boundary = periodic or "
                               "anti_periodic");
    }
    cfg.loaded.reduction = second_order_reduce(phi, psi1, psi2, beta, grid, growth);
    cfg.loaded.problem = cfg.loaded.reduction->phase;
    cfg.loaded.oracle_available = false;
  } else {
    throw contract_violation("config: unknown problem kind '" + kind +
                             "'; supported: gradient_flow, hamiltonian_j1, hamiltonian_j2, "
                             "second_order");
  }

  // solver section
  if (sections.count("solver")) {
    Section& sol = sections["solver"];
    auto& so = cfg.solver;
    if (auto v = sol.get("max_iterations")) so.max_iterations = parse_int(*v, "max_iterations");
    if (auto v = sol.get("gradient_tolerance"))
      so.gradient_tolerance = parse_double(*v, "gradient_tolerance");
    if (auto v = sol.get("objective_tolerance"))
      so.objective_tolerance = parse_double(*v, "objective_tolerance");
    if (auto v = sol.get("epsilon_start")) so.epsilon_schedule.start = parse_double(*v, "epsilon_start");
    if (auto v = sol.get("epsilon_ratio")) so.epsilon_schedule.ratio = parse_double(*v, "epsilon_ratio");
    if (auto v = sol.get("epsilon_floor")) so.epsilon_schedule.floor = parse_double(*v, "epsilon_floor");
    if (auto v = sol.get("lambda_start")) so.lambda_schedule.start = parse_double(*v, "lambda_start");
    if (auto v = sol.get("lambda_ratio")) so.lambda_schedule.ratio = parse_double(*v, "lambda_ratio");
    if (auto v = sol.get("lambda_floor")) so.lambda_schedule.floor = parse_double(*v, "lambda_floor");
    if (auto v = sol.get("method")) {
      if (*v == "auto")
        so.method = SolveMethod::Auto;
      else if (*v == "quasi_newton_smooth")
        so.method = SolveMethod::QuasiNewtonSmooth;
      else if (*v == "proximal_gradient_accelerated")
        so.method = SolveMethod::ProximalGradientAccelerated;
      else
        throw contract_violation("config: unknown method '" + *v + "'");
    }
    require(so.max_iterations > 0 && so.gradient_tolerance > 0 && so.objective_tolerance > 0,
            "config: solver tolerances must be positive");
  }

  // output section
  if (sections.count("output")) {
    Section& out = sections["output"];
    if (auto v = out.get("trajectory")) cfg.output.trajectory = *v;
    if (auto v = out.get("report")) cfg.output.report = *v;
    if (auto v = out.get("rk4_check")) cfg.output.rk4_check = parse_bool(*v, "rk4_check");
    if (auto v = out.get("oracle_check")) cfg.output.oracle_check = parse_bool(*v, "oracle_check");
    if (auto v = out.get("certify_tol")) {
      cfg.output.certify_tol = parse_double(*v, "certify_tol");
      require(cfg.output.certify_tol > 0, "config: certify_tol must be > 0");
    }
  }

  check_unknown_keys(sections);
  return cfg;
}

}  // namespace sdflow::cli
