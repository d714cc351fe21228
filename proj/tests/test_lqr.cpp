#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zolqr/lqr.hpp"
#include "zolqr/presets.hpp"

using namespace zolqr;

namespace {
MatrixXd scalar(double v) {
  MatrixXd m(1, 1);
  m << v;
  return m;
}
}  // namespace

TEST_CASE("fixed point with G = 0 returns the seed") {
  MatrixXd G = MatrixXd::Zero(2, 2);
  MatrixXd S(2, 2);
  S << 3, 1, 1, 2;
  CHECK((solve_fixed_point(G, S, FixedPointSide::Dual) - S).norm() ==
        doctest::Approx(0.0).epsilon(1e-14));
  CHECK((solve_fixed_point(G, S, FixedPointSide::Primal) - S).norm() ==
        doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("scalar geometric series: X = 1 + 0.25 X") {
  MatrixXd G = scalar(0.5), S = scalar(1.0);
  CHECK(solve_fixed_point(G, S, FixedPointSide::Dual)(0, 0) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(solve_fixed_point(G, S, FixedPointSide::Primal)(0, 0) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("fixed point rejects unstable closed loops") {
  CHECK_THROWS_AS(
      solve_fixed_point(scalar(1.0), scalar(1.0), FixedPointSide::Dual),
      UnstablePolicy);
}

TEST_CASE("scalar instance: value matrix, optimum, gradient") {
  Preset p = preset("scalar_1d");
  const LqrInstance& inst = p.instance;

  MatrixXd K = scalar(13.0);
  CostMatrices cm = cost_matrices(inst, K);
  CHECK(cm.P(0, 0) == doctest::Approx(342.81105061504337).epsilon(1e-11));

  auto [kstar, Pstar] = optimal_policy(inst);
  CHECK(kstar.K(0, 0) == doctest::Approx(14.54819161097721).epsilon(1e-10));
  CHECK(Pstar(0, 0) == doctest::Approx(221.4271456208673).epsilon(1e-10));
  CHECK(spectral_radius(inst.closed_loop(kstar.K)) ==
        doctest::Approx(0.19909676837752).epsilon(1e-9));

  // Sigma0 = (16 + 25 + 36)/3 = 77/3 for the uniform three-atom init law
  CHECK(inst.Sigma0(0, 0) == doctest::Approx(77.0 / 3.0).epsilon(1e-14));
  CHECK(exact_gradient(inst, K)(0, 0) ==
        doctest::Approx(-6968.72816).epsilon(1e-7));
  CHECK(exact_gradient(inst, kstar.K).norm() ==
        doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("3x3 two-point instance matches the frozen solver values") {
  Preset p = preset("lqr3x3_twopoint");
  const LqrInstance& inst = p.instance;
  auto [kstar, Pstar] = optimal_policy(inst);
  CHECK(Pstar.trace() == doctest::Approx(15.247517061048).epsilon(1e-9));
  CHECK(population_cost(inst, kstar.K) ==
        doctest::Approx(5.082505687016).epsilon(1e-9));
  CHECK(spectral_radius(inst.closed_loop(kstar.K)) ==
        doctest::Approx(0.2495053783637).epsilon(1e-8));
}

TEST_CASE("remaining presets match the frozen solver values") {
  {
    Preset p = preset("lqr3x3_diag_eps");
    auto [kstar, Pstar] = optimal_policy(p.instance);
    CHECK(population_cost(p.instance, kstar.K) ==
          doctest::Approx(0.4843588336454).epsilon(1e-9));
  }
  {
    Preset p = preset("lqr3x3_diag_noisy");
    auto [kstar, Pstar] = optimal_policy(p.instance);
    CHECK(population_cost(p.instance, kstar.K) ==
          doctest::Approx(27.245184392553).epsilon(1e-9));
  }
  {
    Preset p = preset("dean_laplacian");
    auto [kstar, Pstar] = optimal_policy(p.instance);
    CHECK(population_cost(p.instance, kstar.K) ==
          doctest::Approx(2.3585254902811).epsilon(1e-9));
  }
}

TEST_CASE("primal/dual duality: tr(M Sigma) = tr(P S)") {
  Preset p = preset("lqr3x3_twopoint");
  const LqrInstance& inst = p.instance;
  MatrixXd K0 = policy_with_cost(inst, 8.0, 42);
  CostMatrices cm = cost_matrices(inst, K0);
  double lhs = (cm.M * cm.Sigma).trace();
  double rhs = (cm.P * inst.Sigma0).trace();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("population cost is linear in the correlation seed") {
  Preset p = preset("lqr3x3_twopoint");
  LqrInstance inst = p.instance;
  MatrixXd K0 = policy_with_cost(inst, 9.0, 7);
  double c1 = population_cost(inst, K0);
  inst.Sigma0 *= 3.5;
  CHECK(population_cost(inst, K0) == doctest::Approx(3.5 * c1).epsilon(1e-12));
}

TEST_CASE("gradient matches central differences on a 3x3 instance") {
  Preset p = preset("lqr3x3_twopoint");
  const LqrInstance& inst = p.instance;
  MatrixXd K = policy_with_cost(inst, 10.0, 3);
  MatrixXd g = exact_gradient(inst, K);
  const double h = 1e-5 * (1.0 + K.norm());
  MatrixXd fd(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      MatrixXd Kp = K, Km = K;
      Kp(i, j) += h;
      Km(i, j) -= h;
      fd(i, j) =
          (population_cost(inst, Kp) - population_cost(inst, Km)) / (2 * h);
    }
  CHECK((g - fd).norm() / g.norm() < 1e-4);
}

TEST_CASE("discounted equivalence: Cdyn = gamma/(1-gamma) Cinit at W = Sigma0") {
  Preset p = preset("lqr3x3_diag_noisy");
  LqrInstance dyn = p.instance;
  LqrInstance init = dyn;
  init.mode = NoiseMode::RandomInit;
  init.Sigma0 = dyn.W;
  auto [kstar, Pstar] = optimal_policy(dyn);
  MatrixXd K = policy_with_cost(dyn, population_cost(dyn, kstar.K) + 5.0, 11);
  double ratio = population_cost(dyn, K) / population_cost(init, K);
  CHECK(ratio == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("curvature bundle behaves at and away from the optimum") {
  Preset p = preset("lqr3x3_twopoint");
  const LqrInstance& inst = p.instance;
  auto [kstar, Pstar] = optimal_policy(inst);

  CurvatureBundle at_star = curvature_bundle(inst, kstar.K);
  // the (C - C*) root term vanishes at the optimum (up to solver rounding
  // in C - C*, which the square root amplifies)
  CHECK(at_star.cK[5] < 1e-3);
  CHECK(at_star.mu == doctest::Approx(0.2803278165384).epsilon(1e-8));

  MatrixXd K0 = policy_with_cost(inst, 8.0, 5);
  CurvatureBundle b = curvature_bundle(inst, K0);
  CHECK(b.cost_K0 > b.cost_star);
  for (int i = 0; i < 10; ++i) CHECK(b.cK[i] >= 0.0);
  CHECK(b.rho_K > 0.0);
  CHECK(b.mu > 0.0);
  // the bounded-set ("tilde") level sits at a higher cost, so the radius
  // shrinks and the smoothness constants grow
  CHECK(b.rho_lqr <= b.rho_K);
  CHECK(b.phi_lqr >= b.phi_K);
  CHECK(b.theta > 0.0);
  CHECK(b.theta <= 1.0 / (2.0 * b.phi_lqr) + 1e-15);
}

TEST_CASE("unstable policies are detected and rejected") {
  Preset p = preset("scalar_1d");
  MatrixXd K = scalar(0.0);  // A = 5 uncontrolled
  CHECK(!is_stabilizing(p.instance, K));
  CHECK_THROWS_AS(cost_matrices(p.instance, K), UnstablePolicy);
}

TEST_CASE("instance validation rejects malformed data") {
  Preset p = preset("scalar_1d");
  LqrInstance bad = p.instance;
  bad.Q = scalar(-1.0);
  CHECK_THROWS(bad.validate());
  LqrInstance bad2 = p.instance;
  bad2.gamma = 1.5;
  CHECK_THROWS(bad2.validate());
}
