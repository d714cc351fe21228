#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "zolqr/presets.hpp"
#include "zolqr/zopt.hpp"

using namespace zolqr;

TEST_CASE("one-point estimate reproduces the defining formula") {
  // f(x) = b^T x with b = (3, 0); replay the direction with a twin stream
  MatrixXd H = MatrixXd::Zero(2, 2);
  VectorXd b(2);
  b << 3, 0;
  QuadraticOracle oracle(H, b);
  MatrixXd x(1, 2);
  x << 1, 1;
  const double r = 0.25;

  RngStream rng(21, 0, "formula");
  RngStream twin(21, 0, "formula");
  EstimatorSpec spec{EstimatorMode::OnePoint, r, 1};
  QueryLedger ledger;
  GradientEstimate e = estimate_gradient(oracle, x, spec, rng, ledger);

  VectorXd u = unit_sphere_direction(2, twin);
  VectorXd xp = VectorXd::Map(x.data(), 2) + r * u;
  VectorXd expect = b.dot(xp) * (2.0 / r) * u;
  CHECK((Eigen::Map<VectorXd>(e.g.data(), 2) - expect).norm() < 1e-12);
  CHECK(ledger.total_queries == 1);
}

TEST_CASE("two-point estimate reproduces the defining formula") {
  MatrixXd H = MatrixXd::Zero(2, 2);
  VectorXd b(2);
  b << 3, -1;
  QuadraticOracle oracle(H, b);
  MatrixXd x(1, 2);
  x << 0.5, -0.5;
  const double r = 0.1;

  RngStream rng(22, 0, "formula");
  RngStream twin(22, 0, "formula");
  EstimatorSpec spec{EstimatorMode::TwoPoint, r, 1};
  QueryLedger ledger;
  GradientEstimate e = estimate_gradient(oracle, x, spec, rng, ledger);

  VectorXd u = unit_sphere_direction(2, twin);
  // linear f: [f(x+ru) - f(x-ru)] * D/(2r) * u = D (b.u) u
  VectorXd expect = 2.0 * b.dot(u) * u;
  CHECK((Eigen::Map<VectorXd>(e.g.data(), 2) - expect).norm() < 1e-12);
  CHECK(ledger.total_queries == 2);
}

TEST_CASE("two-point estimator is unbiased on a linear function") {
  MatrixXd H = MatrixXd::Zero(3, 3);
  VectorXd b(3);
  b << 1, -2, 0.5;
  QuadraticOracle oracle(H, b);
  MatrixXd x = MatrixXd::Zero(1, 3);
  EstimatorSpec spec{EstimatorMode::TwoPoint, 0.2, 1};
  RngStream rng(23, 0, "unbiased");
  QueryLedger ledger;
  const int N = 40000;
  VectorXd mean = VectorXd::Zero(3);
  for (int i = 0; i < N; ++i)
    mean += Eigen::Map<VectorXd>(
        estimate_gradient(oracle, x, spec, rng, ledger).g.data(), 3);
  mean /= N;
  // E[D (b.u) u] = D b^T E[u u^T] = b exactly
  CHECK((mean - b).norm() < 0.05);
}

TEST_CASE("minibatch averaging reduces one-point variance by 1/k") {
  MatrixXd H = MatrixXd::Identity(2, 2);
  VectorXd b = VectorXd::Zero(2);
  QuadraticOracle oracle(H, b);
  MatrixXd x(1, 2);
  x << 1, 0;
  RngStream rng(24, 0, "minibatch");
  QueryLedger ledger;
  auto variance = [&](long k, int samples) {
    EstimatorSpec spec{k > 1 ? EstimatorMode::MinibatchOnePoint
                             : EstimatorMode::OnePoint,
                       0.3, k};
    std::vector<VectorXd> gs;
    VectorXd mean = VectorXd::Zero(2);
    for (int i = 0; i < samples; ++i) {
      gs.push_back(Eigen::Map<VectorXd>(
          estimate_gradient(oracle, x, spec, rng, ledger).g.data(), 2));
      mean += gs.back();
    }
    mean /= samples;
    double v = 0;
    for (const auto& g : gs) v += (g - mean).squaredNorm();
    return v / (samples - 1);
  };
  double v1 = variance(1, 4000);
  double v20 = variance(20, 4000);
  CHECK(20.0 * v20 / v1 == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("divergent samples raise the estimate's diverged flag") {
  Preset p = preset("scalar_1d");
  RandInitOracle oracle(p.instance, p.distribution);
  MatrixXd K = MatrixXd::Zero(1, 1);  // unstable
  EstimatorSpec spec{EstimatorMode::OnePoint, 0.01, 1};
  RngStream rng(25, 0, "diverge");
  QueryLedger ledger;
  CHECK(estimate_gradient(oracle, K, spec, rng, ledger).diverged);
}

TEST_CASE("zero step size leaves the policy in place") {
  Preset p = preset("scalar_1d");
  RandInitOracle oracle(p.instance, p.distribution);
  MatrixXd K0 = policy_with_cost(p.instance, 6000.0, 5);
  EstimatorSpec spec{EstimatorMode::OnePoint, 0.01, 1};
  OptConfig oc;
  oc.step_size = 0.0;
  oc.iterations = 50;
  oc.master_seed = 77;
  RunTrace t = run_zero_order(oracle, K0, spec, oc);
  CHECK((t.final_K - K0).norm() == 0.0);
  CHECK(t.final_gap == doctest::Approx(t.initial_gap).epsilon(1e-14));
  CHECK(t.ledger.total_queries == 50);
}

TEST_CASE("optimization runs are bit-deterministic given the seed") {
  Preset p = preset("lqr3x3_twopoint");
  RandInitOracle oracle(p.instance, p.distribution);
  MatrixXd K0 = policy_with_cost(p.instance, 8.0, 6);
  EstimatorSpec spec{EstimatorMode::TwoPoint, 0.05, 1};
  OptConfig oc;
  oc.step_size = 1e-3;
  oc.iterations = 300;
  oc.master_seed = 99;
  oc.record_trace = true;
  RunTrace a = run_zero_order(oracle, K0, spec, oc);
  RunTrace b = run_zero_order(oracle, K0, spec, oc);
  CHECK((a.final_K - b.final_K).norm() == 0.0);
  CHECK(a.gaps == b.gaps);
  CHECK(a.ledger.total_queries == b.ledger.total_queries);
}

TEST_CASE("a tuned two-point run actually descends") {
  Preset p = preset("lqr3x3_twopoint");
  RandInitOracle oracle(p.instance, p.distribution);
  MatrixXd K0 = policy_with_cost(p.instance, 8.0, 7);
  EstimatorSpec spec{EstimatorMode::TwoPoint, 0.003, 1};
  OptConfig oc;
  oc.step_size = 1e-5;
  oc.iterations = 200000;
  oc.master_seed = 101;
  oc.target_gap = 0.5;
  RunTrace t = run_zero_order(oracle, K0, spec, oc);
  CHECK(t.reached_target);
  CHECK(t.queries_at_target > 0);
  CHECK(t.queries_at_target <= t.ledger.total_queries);
}

TEST_CASE("theory parameter calculators are positive and admissible") {
  Preset p = preset("lqr3x3_twopoint");
  const LqrInstance& inst = p.instance;
  MatrixXd K0 = policy_with_cost(inst, 8.0, 8);

  for (ParamKind kind : {ParamKind::OnePointRandInit,
                         ParamKind::TwoPointRandInit}) {
    TheoryParams tp = theory_params(kind, inst, K0, 0.1);
    CHECK(tp.eta > 0.0);
    CHECK(tp.r > 0.0);
    CHECK(tp.T > 0);
  }
  // dropping the analysis-artifact radius cap can only enlarge the radius
  TheoryParams keep = theory_params(ParamKind::OnePointRandInit, inst, K0, 0.1,
                                    0.01, false);
  TheoryParams drop = theory_params(ParamKind::OnePointRandInit, inst, K0, 0.1,
                                    0.01, true);
  CHECK(drop.r >= keep.r);

  // an epsilon near the initial gap violates the log admissibility bound
  CHECK_THROWS_AS(
      theory_params(ParamKind::OnePointRandInit, inst, K0, 30.0),
      AdmissibilityError);
  CHECK_THROWS_AS(
      theory_params(ParamKind::MinibatchOnePoint, inst, K0, 1e9),
      AdmissibilityError);

  CurvatureBundle b = curvature_bundle(inst, K0);
  double cap = std::min({1.0, 1.0 / b.mu, b.rho_lqr * b.rho_lqr}) *
               (b.cost_K0 - b.cost_star) / 10.0;
  TheoryParams mb = theory_params(ParamKind::MinibatchOnePoint, inst, K0,
                                  0.5 * cap);
  CHECK(mb.k >= 1);
  CHECK(mb.eta > 0.0);
  CHECK(mb.T > 0);
}

TEST_CASE("noisy theory parameters exist for the discounted preset") {
  Preset p = preset("lqr3x3_diag_noisy");
  auto [kstar, Pstar] = optimal_policy(p.instance);
  MatrixXd K0 = policy_with_cost(
      p.instance, population_cost(p.instance, kstar.K) + 3.0, 9);
  TheoryParams tp = theory_params(ParamKind::OnePointNoisy, p.instance, K0,
                                  0.5);
  CHECK(tp.eta > 0.0);
  CHECK(tp.r > 0.0);
  CHECK(tp.T > 0);
}
