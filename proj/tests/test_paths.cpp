#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "sdflow/paths.hpp"

using namespace sdflow;
using Vec = VectorX<double>;
using Mat = MatrixX<double>;

namespace {

Path<double> random_path(const PathGrid<double>& g, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat nodes(g.d, g.N + 1);
  for (Eigen::Index i = 0; i < nodes.size(); ++i) nodes(i) = n(rng);
  return Path<double>(g, std::move(nodes));
}

}  // namespace

TEST_CASE("derivative of piecewise-linear paths") {
  PathGrid<double> g(2.0, 2, 1);
  Mat nodes(1, 3);
  nodes << 0.0, 1.0, 2.0;
  const Mat v = derivative(Path<double>(g, nodes));
  CHECK(v(0, 0) == doctest::Approx(1.0));
  CHECK(v(0, 1) == doctest::Approx(1.0));

  // constant path
  const Path<double> c = Path<double>::constant(PathGrid<double>(1.0, 8, 2), Vec::Constant(2, 0.7));
  CHECK(derivative(c).norm() == 0.0);

  // samples of e^{-t}: interval slopes near -e^{-t} at midpoints
  PathGrid<double> ge(1.0, 100, 1);
  Mat en(1, 101);
  for (int i = 0; i <= 100; ++i) en(0, i) = std::exp(-ge.node_time(i));
  const Mat ve = derivative(Path<double>(ge, en));
  for (int i = 0; i < 100; ++i)
    CHECK(std::abs(ve(0, i) + std::exp(-ge.midpoint_time(i))) <= 1e-2);
}

TEST_CASE("a2 norm") {
  PathGrid<double> g(1.0, 10, 1);
  CHECK(a2_norm(Path<double>::zero(g)) == 0.0);

  const Path<double> c = Path<double>::constant(PathGrid<double>(3.0, 5, 2), Vec::Constant(2, -1.5));
  CHECK(a2_norm(c) == doctest::Approx(std::sqrt(2.0) * 1.5).epsilon(1e-14));

  Mat nodes(1, 11);
  for (int i = 0; i <= 10; ++i) nodes(0, i) = g.node_time(i);  // x(t) = t
  CHECK(a2_norm(Path<double>(g, nodes)) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-14));
}

TEST_CASE("a2 norm vanishes only on the zero path") {
  std::mt19937_64 rng(5);
  PathGrid<double> g(1.0, 12, 2);
  for (int t = 0; t < 50; ++t) {
    const Path<double> p = random_path(g, rng);
    if (p.nodes.norm() > 0) CHECK(a2_norm(p) > 0.0);
  }
}

TEST_CASE("cross term telescopes exactly") {
  // single interval (1, e^{-1})
  PathGrid<double> g1(1.0, 2, 1);
  Mat nodes(1, 3);
  const double e1 = std::exp(-1.0);
  nodes << 1.0, 0.5 * (1.0 + e1), e1;  // linear interpolant keeps the identity exact
  const double expected = 0.5 * e1 * e1 - 0.5;
  CHECK(cross_term(Path<double>(g1, nodes)) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(-0.43233).epsilon(1e-4));

  // random paths, N = 50: telescoping to 1e-12
  std::mt19937_64 rng(7);
  PathGrid<double> g(2.0, 50, 3);
  for (int t = 0; t < 40; ++t) {
    const Path<double> p = random_path(g, rng, 2.0);
    const double lhs = cross_term(p);
    const double rhs = 0.5 * p.nodes.col(50).squaredNorm() - 0.5 * p.nodes.col(0).squaredNorm();
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }

  // equal endpoints: zero
  Path<double> q = random_path(g, rng);
  q.nodes.col(50) = q.nodes.col(0);
  CHECK(std::abs(cross_term(q)) <= 1e-12);
}

TEST_CASE("symplectic cross term") {
  // straight path u(t) = (t, 0)
  PathGrid<double> g(1.0, 64, 2);
  Mat nodes(2, 65);
  for (int i = 0; i <= 64; ++i) {
    nodes(0, i) = g.node_time(i);
    nodes(1, i) = 0.0;
  }
  CHECK(std::abs(symplectic_cross_term(Path<double>(g, nodes))) <= 1e-14);

  // half rotation: -pi within 2e-3 at N = 2000
  PathGrid<double> gr(1.0, 2000, 2);
  Mat rn(2, 2001);
  for (int i = 0; i <= 2000; ++i) {
    const double th = EIGEN_PI * gr.node_time(i);
    rn(0, i) = std::cos(th);
    rn(1, i) = std::sin(th);
  }
  CHECK(std::abs(symplectic_cross_term(Path<double>(gr, rn)) + EIGEN_PI) <= 2e-3);

  // scaling by s multiplies the value by s^2 (bilinearity)
  std::mt19937_64 rng(11);
  PathGrid<double> g2(1.5, 20, 4);
  const Path<double> p = random_path(g2, rng);
  const double base = symplectic_cross_term(p);
  const double s = 2.75;
  const Path<double> ps(g2, Mat(s * p.nodes));
  CHECK(symplectic_cross_term(ps) == doctest::Approx(s * s * base).epsilon(1e-12));

  // invariance under adding a constant vector to all nodes
  Vec shift(4);
  shift << 0.3, -1.2, 0.8, 2.0;
  Mat shifted = p.nodes;
  shifted.colwise() += shift;
  CHECK(symplectic_cross_term(Path<double>(g2, shifted)) ==
        doctest::Approx(base).epsilon(1e-10).scale(1.0));

  // odd dimension rejected
  PathGrid<double> godd(1.0, 4, 3);
  CHECK_THROWS_AS((void)symplectic_cross_term(Path<double>::zero(godd)), contract_violation);
}

TEST_CASE("antiperiodic synthesis") {
  PathGrid<double> g(2.0, 40, 1);
  std::vector<AntiperiodicMode<double>> modes(1);
  modes[0].k = 1;
  modes[0].amplitude = Vec::Constant(1, 1.0);
  const Path<double> p = antiperiodic_sample(g, modes);
  for (int i = 0; i <= 40; i += 5)
    CHECK(p.nodes(0, i) == doctest::Approx(std::cos(EIGEN_PI * g.node_time(i) / g.T)).epsilon(1e-12));
  CHECK(p.nodes(0, 40) == -p.nodes(0, 0));  // exactly

  // empty coefficient list: zero path
  CHECK(antiperiodic_sample(g, {}).nodes.norm() == 0.0);

  // random 5-mode synthesis, N = 1000: discrete energies match Parseval
  std::mt19937_64 rng(13);
  std::normal_distribution<double> amp(0.0, 1.0);
  PathGrid<double> gp(1.7, 1000, 2);
  std::vector<AntiperiodicMode<double>> ms(5);
  const int ks[5] = {1, -1, 2, 3, -4};
  for (int m = 0; m < 5; ++m) {
    ms[static_cast<std::size_t>(m)].k = ks[m];
    ms[static_cast<std::size_t>(m)].amplitude = Vec(2);
    ms[static_cast<std::size_t>(m)].amplitude << amp(rng), amp(rng);
  }
  const Path<double> q = antiperiodic_sample(gp, ms);
  const auto [l2_exact, deriv_exact] = antiperiodic_parseval(ms, gp.T);
  double l2 = 0.0;
  for (int i = 0; i < gp.N; ++i) {
    const auto xi = q.nodes.col(i);
    const auto xj = q.nodes.col(i + 1);
    l2 += gp.h() / 3.0 * (xi.squaredNorm() + xi.dot(xj) + xj.squaredNorm());
  }
  const double deriv = gp.h() * derivative(q).squaredNorm();
  CHECK(l2 == doctest::Approx(l2_exact).epsilon(1e-4));
  CHECK(deriv == doctest::Approx(deriv_exact).epsilon(1e-4));

  CHECK_THROWS_AS((void)antiperiodic_sample(g, {AntiperiodicMode<double>{0, Vec::Zero(1)}}),
                  contract_violation);
}

TEST_CASE("csv round trip is bit exact") {
  std::mt19937_64 rng(17);
  const PathGrid<double> g(1.25, 16, 3);
  const Path<double> p = random_path(g, rng, 5.0);
  std::stringstream ss;
  write_csv(p, ss);
  const Path<double> q = read_csv<double>(ss);
  REQUIRE(q.grid.N == g.N);
  REQUIRE(q.grid.d == g.d);
  CHECK((q.nodes - p.nodes).norm() == 0.0);  // 17 significant digits round-trip doubles

  // extra trailing columns (e.g. residuals) are ignored on read
  std::stringstream with_extra;
  with_extra << "t,x1,residual\n0,1.5,0.1\n0.5,2.5,0.2\n1,3.5,\n";
  const Path<double> r = read_csv<double>(with_extra);
  CHECK(r.grid.d == 1);
  CHECK(r.nodes(0, 1) == 2.5);

  std::stringstream bad;
  bad << "x1,t\n0,0\n";
  CHECK_THROWS_AS((void)read_csv<double>(bad), contract_violation);
}

TEST_CASE("grid and path contracts") {
  CHECK_THROWS_AS(PathGrid<double>(0.0, 4, 1), contract_violation);
  CHECK_THROWS_AS(PathGrid<double>(1.0, 1, 1), contract_violation);
  PathGrid<double> g(1.0, 4, 2);
  CHECK_THROWS_AS(Path<double>(g, Mat::Zero(2, 4)), contract_violation);
  Mat nan_nodes = Mat::Zero(2, 5);
  nan_nodes(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Path<double>(g, nan_nodes), contract_violation);
  CHECK(g.h() == doctest::Approx(0.25));
  CHECK(g.midpoint_time(1) == doctest::Approx(0.375));
}

TEST_CASE("float instantiation of the path core") {
  PathGrid<float> g(1.0f, 4, 2);
  MatrixX<float> nodes = MatrixX<float>::Ones(2, 5);
  const Path<float> p(g, nodes);
  CHECK(cross_term(p) == doctest::Approx(0.0f));
  CHECK(a2_norm(p) == doctest::Approx(std::sqrt(2.0f)));
}
