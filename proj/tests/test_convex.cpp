#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracle_utils.hpp"
#include "sdflow/conjugate.hpp"
#include "sdflow/convex.hpp"

using namespace sdflow;
using Vec = VectorX<double>;

namespace {

Vec vec1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

Vec randn_vec(Eigen::Index d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

}  // namespace

TEST_CASE("conjugate: closed forms against frozen values") {
  // (1/2)x^2 is its own conjugate
  auto half_sq = scaled_squared_norm(1.0, Eigen::Index(1));
  CHECK(conjugate(half_sq, vec1(3.0)) == doctest::Approx(4.5).epsilon(1e-14));

  // support function of the origin vanishes everywhere
  auto ind0 = indicator_point(Vec::Zero(1));
  CHECK(conjugate(ind0, vec1(0.0)) == 0.0);
  CHECK(conjugate(ind0, vec1(7.5)) == 0.0);
  CHECK(conjugate(ind0, vec1(-2.0)) == 0.0);

  // f(x) = x^2/4 - x (the initial-value boundary shape with x0 = 1)
  auto f = quadratic_1d(0.5, -1.0);
  CHECK(conjugate(f, vec1(0.5)) == doctest::Approx(2.25).epsilon(1e-12));
  const double grid = oracle::grid_sup_conjugate_1d(
      [&](double x) { return 0.25 * x * x - x; }, 0.5, -20.0, 20.0, 1e-4);
  CHECK(conjugate(f, vec1(0.5)) == doctest::Approx(grid).epsilon(1e-7));
}

TEST_CASE("conjugate: dimension mismatch is a contract violation") {
  auto f = scaled_squared_norm(1.0, Eigen::Index(2));
  CHECK_THROWS_AS((void)conjugate(f, vec1(1.0)), contract_violation);
}

TEST_CASE("conjugate: numeric 1-D stationarity path") {
  // smooth strictly convex black box: x^4/4, conjugate (3/4) y^{4/3}
  Capabilities caps;
  caps.smooth = true;
  auto f = custom_function<double>(
      1, [](const Vec& x) { return 0.25 * std::pow(x[0], 4); },
      [](const Vec& x) { return vec1(std::pow(x[0], 3)); }, nullptr, caps, "quartic");
  CHECK(conjugate(f, vec1(8.0)) == doctest::Approx(12.0).epsilon(1e-8));
  CHECK(conjugate(f, vec1(-1.0)) == doctest::Approx(0.75).epsilon(1e-8));
}

TEST_CASE("conjugate: escape from the bracket carries the best bound") {
  Capabilities caps;
  caps.smooth = true;
  // affine black box: conjugate infinite off the slope
  auto f = custom_function<double>(
      1, [](const Vec& x) { return 2.0 * x[0]; }, [](const Vec&) { return vec1(2.0); }, nullptr,
      caps, "affine_bb");
  CHECK_THROWS_AS((void)conjugate(f, vec1(3.0)), numeric_error);
}

TEST_CASE("prox: frozen values") {
  auto half_sq = scaled_squared_norm(1.0, Eigen::Index(1));
  CHECK(prox(half_sq, 1.0, vec1(2.0))[0] == doctest::Approx(1.0).epsilon(1e-14));

  auto ind0 = indicator_point(Vec::Zero(1));
  CHECK(prox(ind0, 0.37, vec1(7.0))[0] == 0.0);

  // f(x) = x^2/2 + x: p = (x - lambda b)/(1 + lambda)
  auto f = quadratic_1d(1.0, 1.0);
  CHECK(prox(f, 1.0, vec1(3.0))[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prox: optimality via Fenchel-Young equality") {
  std::mt19937_64 rng(7);
  std::vector<ConvexFunction<double>> fs = {
      scaled_squared_norm(0.7, Eigen::Index(3)),
      quadratic_1d(2.0, -0.5, 0.2),
      scaled_l1(0.8, Eigen::Index(3)),
      indicator_box(Vec::Constant(2, -1.0), Vec::Constant(2, 2.0)),
  };
  for (const auto& f : fs) {
    for (int t = 0; t < 25; ++t) {
      const Vec x = randn_vec(f.dimension(), rng, 2.0);
      const double lambda = 0.3 + 0.5 * (t % 4);
      const Vec p = prox(f, lambda, x);
      const Vec y = (x - p) / lambda;
      const double slack = f.value(p) + f.conjugate_value(y) - p.dot(y);
      CHECK(std::abs(slack) <= 1e-8);
    }
  }
}

TEST_CASE("moreau envelope: frozen values and a dense-grid oracle") {
  auto ind0 = indicator_point(Vec::Zero(1));
  CHECK(moreau_envelope(ind0, 0.5, vec1(1.0)) == doctest::Approx(1.0).epsilon(1e-14));

  auto half_sq = scaled_squared_norm(1.0, Eigen::Index(1));
  CHECK(moreau_envelope(half_sq, 1.0, vec1(2.0)) == doctest::Approx(1.0).epsilon(1e-12));
  const double grid = oracle::grid_inf_moreau_1d([](double z) { return 0.5 * z * z; }, 1.0, 2.0,
                                                 -10.0, 10.0, 1e-4);
  CHECK(moreau_envelope(half_sq, 1.0, vec1(2.0)) == doctest::Approx(grid).epsilon(1e-7));

  auto l1 = scaled_l1(1.0, Eigen::Index(1));
  CHECK(moreau_envelope(l1, 0.25, vec1(0.0)) == 0.0);
  CHECK(moreau_envelope(l1, 4.0, vec1(0.0)) == 0.0);
}

TEST_CASE("moreau envelope: monotone in lambda and below f") {
  std::mt19937_64 rng(11);
  std::vector<ConvexFunction<double>> fs = {scaled_squared_norm(1.3, Eigen::Index(2)),
                                            scaled_l1(0.6, Eigen::Index(2)),
                                            indicator_point(Vec::Constant(2, 0.4))};
  for (const auto& f : fs) {
    for (int t = 0; t < 10; ++t) {
      const Vec x = randn_vec(2, rng, 2.0);
      double prev = moreau_envelope(f, 1e-3, x);
      const double fx = f.value(x);
      if (is_finite(fx)) CHECK(prev <= fx + 1e-12);
      for (double lambda : {1e-2, 1e-1, 1.0, 10.0}) {
        const double cur = moreau_envelope(f, lambda, x);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
      }
    }
  }
}

TEST_CASE("prox is nonexpansive") {
  std::mt19937_64 rng(13);
  std::vector<ConvexFunction<double>> fs = {
      scaled_squared_norm(2.0, Eigen::Index(3)), scaled_l1(1.1, Eigen::Index(3)),
      indicator_ball(Vec::Zero(3), 0.7),
      quadratic(MatrixX<double>{{2.0, 0.3, 0.0}, {0.3, 1.0, 0.0}, {0.0, 0.0, 0.5}},
                Vec::Zero(3))};
  for (const auto& f : fs) {
    for (int t = 0; t < 30; ++t) {
      const Vec x = randn_vec(3, rng, 3.0);
      const Vec y = randn_vec(3, rng, 3.0);
      const double lambda = 0.2 + (t % 5);
      CHECK((prox(f, lambda, x) - prox(f, lambda, y)).norm() <= (x - y).norm() + 1e-12);
    }
  }
}

TEST_CASE("sampled convexity of the builtins") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uth(0.0, 1.0);
  std::vector<ConvexFunction<double>> fs = {
      scaled_squared_norm(0.9, Eigen::Index(2)), scaled_l1(0.5, Eigen::Index(2)),
      quadratic(MatrixX<double>{{1.0, 0.2}, {0.2, 2.0}}, Vec::Constant(2, -0.3), 0.1),
      support_function(indicator_box(Vec::Constant(2, -1.0), Vec::Constant(2, 0.5)))};
  for (const auto& f : fs) {
    for (int t = 0; t < 200; ++t) {
      const Vec x = randn_vec(2, rng, 2.0);
      const Vec y = randn_vec(2, rng, 2.0);
      const double th = uth(rng);
      const double lhs = f.value(th * x + (1 - th) * y);
      CHECK(lhs <= th * f.value(x) + (1 - th) * f.value(y) + 1e-10);
    }
  }
}

TEST_CASE("Fenchel-Young inequality on 1000 samples per builtin") {
  std::mt19937_64 rng(19);
  std::vector<ConvexFunction<double>> fs = {
      scaled_squared_norm(1.4, Eigen::Index(2)),
      quadratic(MatrixX<double>{{1.5, -0.2}, {-0.2, 0.8}}, Vec::Constant(2, 0.4)),
      scaled_l1(0.9, Eigen::Index(2)),
      indicator_box(Vec::Constant(2, -0.5), Vec::Constant(2, 1.5)),
      indicator_point(Vec::Constant(2, 0.3)),
      zero_function<double>(2)};
  for (const auto& f : fs) {
    // pull the samples into the domains through the prox maps, so every
    // builtin gets its full 1000 probes
    const auto fstar = conjugate_function(f);
    for (int t = 0; t < 1000; ++t) {
      const Vec x = f.prox(1.0, randn_vec(2, rng, 2.0));
      const Vec y = fstar.prox(1.0, randn_vec(2, rng, 2.0));
      const double fx = f.value(x);
      const double fy = f.conjugate_value(y);
      REQUIRE(is_finite(fx));
      REQUIRE(is_finite(fy));
      CHECK(fx + fy >= x.dot(y) - 1e-10);
    }
  }
}

TEST_CASE("biconjugation recovers closed-form builtins") {
  // f** computed by a refined grid over the closed-form conjugate
  ConjugateOptions<double> opts;
  opts.bracket_radius = 50.0;
  opts.refine_passes = 6;
  std::mt19937_64 rng(23);
  std::vector<ConvexFunction<double>> fs = {scaled_squared_norm(0.7, Eigen::Index(1)),
                                            quadratic_1d(1.0, 1.0, 0.3),
                                            scaled_l1(0.5, Eigen::Index(1))};
  for (const auto& f : fs) {
    auto fstar = custom_function<double>(
        1, [f](const Vec& y) { return f.conjugate_value(y); }, nullptr, nullptr, {}, "fstar");
    for (int t = 0; t < 8; ++t) {
      const Vec x = randn_vec(1, rng, 1.5);
      const double fxx = grid_conjugate(fstar, x, opts);
      CHECK(fxx == doctest::Approx(f.value(x)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("epsilon perturbation: conjugates become finite and smooth") {
  // phi = 0: perturbation is |x|^2/2 with conjugate |y|^2/2
  auto tf = TimeConvexFunction<double>::constant(1.0, zero_function<double>(1));
  auto pert = epsilon_perturb(tf, 1.0);
  auto f = pert.at(0.3);
  CHECK(f.value(vec1(2.0)) == doctest::Approx(2.0));
  CHECK(f.conjugate_value(vec1(3.0)) == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(f.capabilities().conjugate_finite);
  CHECK(f.capabilities().conjugate_smooth);

  // phi = |x| has conjugate +inf outside [-1,1]; after eps = 1 the
  // conjugate at 3 is (|3|-1)^2/2 = 2
  auto tl1 = TimeConvexFunction<double>::constant(1.0, scaled_l1(1.0, Eigen::Index(1)));
  auto pl1 = epsilon_perturb(tl1, 1.0).at(0.0);
  CHECK(pl1.conjugate_value(vec1(3.0)) == doctest::Approx(2.0).epsilon(1e-12));
  const double grid = oracle::grid_sup_conjugate_1d(
      [](double x) { return std::abs(x) + 0.5 * x * x; }, 3.0, -30.0, 30.0, 1e-4);
  CHECK(pl1.conjugate_value(vec1(3.0)) == doctest::Approx(grid).epsilon(1e-7));
}

TEST_CASE("epsilon perturbation satisfies the two-sided conjugate sandwich") {
  // phi = (beta/2)x^2 with beta = 1, alpha = gamma = 0, eps = 0.1:
  // |u|^2 / (2(beta+eps)) <= phi_eps^*(u) <= |u|^2 / (2 eps)
  const double beta = 1.0, eps = 0.1;
  auto tf = TimeConvexFunction<double>::constant(1.0, scaled_squared_norm(beta, Eigen::Index(1)));
  auto f = epsilon_perturb(tf, eps).at(0.5);
  std::mt19937_64 rng(29);
  for (int t = 0; t < 100; ++t) {
    const Vec u = randn_vec(1, rng, 3.0);
    const double v = f.conjugate_value(u);
    CHECK(v >= u.squaredNorm() / (2.0 * (beta + eps)) - 1e-10);
    CHECK(v <= u.squaredNorm() / (2.0 * eps) + 1e-10);
  }
}

TEST_CASE("hamiltonian of the basic pair: closed form vs sup oracle") {
  auto tf = TimeConvexFunction<double>::constant(1.0, scaled_squared_norm(1.0, Eigen::Index(1)));
  CHECK(hamiltonian_of_lagrangian(tf, 0.0, vec1(1.0), vec1(2.0)) ==
        doctest::Approx(1.5).epsilon(1e-14));
  CHECK(hamiltonian_of_lagrangian(tf, 0.0, vec1(0.0), vec1(0.0)) == 0.0);

  auto quarter = TimeConvexFunction<double>::constant(1.0, quadratic_1d(0.5, 0.0));
  CHECK(hamiltonian_of_lagrangian(quarter, 0.0, vec1(2.0), vec1(-2.0)) ==
        doctest::Approx(0.0).epsilon(1e-14));

  // numeric sup over p of <y,p> - L(x,p) must agree with phi(-y) - phi(x)
  for (auto [x, y] : std::vector<std::pair<double, double>>{{1.0, 2.0}, {0.3, -0.7}, {2.0, -2.0}}) {
    auto f = quarter.at(0.0);
    const double sup = oracle::grid_sup_hamiltonian_1d(
        [&](double xx, double p) { return f.value(vec1(xx)) + f.conjugate_value(vec1(-p)); }, x,
        y, -50.0, 50.0, 1e-3);
    CHECK(hamiltonian_of_lagrangian(quarter, 0.0, vec1(x), vec1(y)) ==
          doctest::Approx(sup).epsilon(1e-5));
  }

  // outside dom phi the flag is -inf
  auto ind = TimeConvexFunction<double>::constant(
      1.0, indicator_point(Vec::Zero(1)));
  CHECK(hamiltonian_of_lagrangian(ind, 0.0, vec1(2.0), vec1(0.0)) ==
        -plus_infinity<double>());
}

TEST_CASE("separable sums act blockwise") {
  std::vector<ConvexFunction<double>> parts = {scaled_squared_norm(2.0, Eigen::Index(2)),
                                               scaled_l1(0.5, Eigen::Index(1))};
  auto f = separable_sum(parts);
  REQUIRE(f.dimension() == 3);
  Vec x(3);
  x << 1.0, -2.0, 3.0;
  CHECK(f.value(x) == doctest::Approx(2.0 * 0.5 * 5.0 + 0.5 * 3.0));
  const Vec p = f.prox(1.0, x);
  CHECK(p.head(2).isApprox(x.head(2) / 3.0, 1e-12));
  CHECK(p[2] == doctest::Approx(2.5));
  Vec y(3);
  y << 0.5, 0.5, 0.2;
  CHECK(f.conjugate_value(y) == doctest::Approx(0.5 / 4.0 * 1.0 + 0.0));
}

TEST_CASE("conjugate pair adapter: validation probes") {
  // genuine pair: |x| with the indicator of [-1,1]
  auto pair = conjugate_pair(scaled_l1(1.0, Eigen::Index(1)),
                             indicator_box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)));
  CHECK(pair.value(vec1(-2.0)) == doctest::Approx(2.0));
  CHECK(pair.conjugate_value(vec1(0.5)) == 0.0);

  // broken pair: |x| against |y|^2/2 violates Fenchel-Young equality at
  // every prox point with p != 0
  CHECK_THROWS_AS((void)conjugate_pair(scaled_l1(1.0, Eigen::Index(1)),
                                       scaled_squared_norm(1.0, Eigen::Index(1))),
                  contract_violation);
}

TEST_CASE("conjugate_function swaps roles exactly") {
  auto f = quadratic_1d(2.0, -1.0, 0.25);
  auto g = conjugate_function(f);
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const Vec y = randn_vec(1, rng, 2.0);
    CHECK(g.value(y) == doctest::Approx(f.conjugate_value(y)).epsilon(1e-13));
    CHECK(g.conjugate_value(y) == doctest::Approx(f.value(y)).epsilon(1e-13));
  }
  CHECK(conjugate_pair_probe(g, f) <= 1e-9);
}

TEST_CASE("support functions: values, prox, gradients") {
  auto box = indicator_box(Vec::Constant(2, -1.0), Vec::Constant(2, 0.5));
  auto sigma = support_function(box);
  Vec y(2);
  y << 2.0, -3.0;
  CHECK(sigma.value(y) == doctest::Approx(0.5 * 2.0 + (-1.0) * (-3.0)));
  // subgradient is a maximizer over the set
  const Vec g = sigma.subgradient(y);
  CHECK(g[0] == doctest::Approx(0.5));
  CHECK(g[1] == doctest::Approx(-1.0));
  CHECK(conjugate_pair_probe(sigma, box) <= 1e-9);

  auto ball = indicator_ball(Vec::Constant(2, 0.25), 1.5);
  auto sb = support_function(ball);
  CHECK(sb.value(y) == doctest::Approx(0.25 * (2.0 - 3.0) + 1.5 * y.norm()).epsilon(1e-13));
  CHECK(conjugate_pair_probe(sb, ball) <= 1e-9);
}

TEST_CASE("affine indicator: projection and support") {
  MatrixX<double> C(1, 2);
  C << 1.0, 1.0;
  Vec rhs(1);
  rhs << 1.0;
  auto aff = indicator_affine(C, rhs);  // the line x + y = 1
  Vec x(2);
  x << 3.0, 0.0;
  const Vec p = aff.prox(1.0, x);
  CHECK((C * p - rhs).norm() <= 1e-12);
  CHECK(p[0] == doctest::Approx(2.0));
  CHECK(p[1] == doctest::Approx(-1.0));
  CHECK(aff.value(p) == 0.0);
  // support finite only on the row space span{(1,1)}
  Vec inrange(2), offrange(2);
  inrange << 2.0, 2.0;
  offrange << 1.0, -1.0;
  CHECK(is_finite(aff.conjugate_value(inrange)));
  CHECK(!is_finite(aff.conjugate_value(offrange)));
}

TEST_CASE("growth bound sampling") {
  auto tf = TimeConvexFunction<double>::constant(1.0, scaled_squared_norm(1.0, Eigen::Index(2)));
  GrowthBounds<double> ok{1.0, 0.0, 0.0};
  CHECK(growth_violation(tf, ok) <= 1e-12);
  GrowthBounds<double> bad{0.5, 0.0, 0.0};  // declared beta below the true curvature
  CHECK(growth_violation(tf, bad) > 0.1);
  CHECK(sampled_properness(tf));
}

TEST_CASE("float instantiation stays usable") {
  auto f = scaled_squared_norm(1.0f, Eigen::Index(1));
  VectorX<float> y(1);
  y[0] = 3.0f;
  CHECK(conjugate(f, y) == doctest::Approx(4.5f));
}
