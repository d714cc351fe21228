#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "zolqr/presets.hpp"
#include "zolqr/rollout.hpp"

using namespace zolqr;

TEST_CASE("exact sample cost is the quadratic form in P") {
  Preset p = preset("scalar_1d");
  const LqrInstance& inst = p.instance;
  MatrixXd K(1, 1);
  K << 13.0;
  VectorXd s0(1);
  s0 << 5.0;
  double exact = sample_cost_randinit(inst, K, s0, RolloutMethod::Exact);
  CHECK(exact == doctest::Approx(25.0 * 342.81105061504337).epsilon(1e-10));
}

TEST_CASE("simulated rollout converges to the exact value") {
  Preset p = preset("scalar_1d");
  const LqrInstance& inst = p.instance;
  MatrixXd K(1, 1);
  K << 13.0;
  VectorXd s0(1);
  s0 << 4.0;
  double exact = sample_cost_randinit(inst, K, s0, RolloutMethod::Exact);
  QueryLedger ledger;
  long T = truncation_horizon(inst, K, 1e-9 * exact, &ledger);
  double sim = sample_cost_randinit(inst, K, s0, RolloutMethod::Simulated, T);
  CHECK(sim == doctest::Approx(exact).epsilon(1e-8));
  CHECK_FALSE(ledger.horizon_capped);
}

TEST_CASE("unstable policies yield the infinite sentinel, not a throw") {
  Preset p = preset("scalar_1d");
  MatrixXd K = MatrixXd::Zero(1, 1);
  VectorXd s0(1);
  s0 << 4.0;
  CHECK(sample_cost_randinit(p.instance, K, s0, RolloutMethod::Exact) ==
        kInfiniteCost);
  CHECK(sample_cost_randinit(p.instance, K, s0, RolloutMethod::Simulated,
                             500) == kInfiniteCost);
}

TEST_CASE("ledger counts queries exactly") {
  Preset p = preset("lqr3x3_twopoint");
  MatrixXd K0 = policy_with_cost(p.instance, 8.0, 1);
  RngStream rng(9, 0, "ledger");
  QueryLedger ledger;
  for (int i = 0; i < 5; ++i)
    query_one_point(p.instance, K0, p.distribution, rng, ledger,
                    RolloutMethod::Exact);
  CHECK(ledger.total_queries == 5);
  for (int i = 0; i < 3; ++i)
    query_two_point(p.instance, K0, K0, p.distribution, rng, ledger);
  CHECK(ledger.total_queries == 11);
}

TEST_CASE("two-point queries share one initial-state draw") {
  Preset p = preset("lqr3x3_twopoint");
  MatrixXd K0 = policy_with_cost(p.instance, 8.0, 1);
  RngStream rng(10, 0, "pair");
  QueryLedger ledger;
  for (int i = 0; i < 10; ++i) {
    auto [fp, fm] = query_two_point(p.instance, K0, K0, p.distribution, rng,
                                    ledger);
    CHECK(fp == fm);  // identical policies, shared draw: identical costs
  }
}

TEST_CASE("truncation horizon grows as the tolerance shrinks") {
  Preset p = preset("lqr3x3_diag_noisy");
  auto [kstar, Pstar] = optimal_policy(p.instance);
  MatrixXd K = policy_with_cost(
      p.instance, population_cost(p.instance, kstar.K) + 5.0, 2);
  long t1 = truncation_horizon(p.instance, K, 1e-3);
  long t2 = truncation_horizon(p.instance, K, 1e-6);
  long t3 = truncation_horizon(p.instance, K, 1e-9);
  CHECK(t1 > 0);
  CHECK(t2 >= t1);
  CHECK(t3 >= t2);
  CHECK(t3 < 1000000);
}

TEST_CASE("noisy rollouts average to the discounted population cost") {
  Preset p = preset("lqr3x3_diag_noisy");
  const LqrInstance& inst = p.instance;
  auto [kstar, Pstar] = optimal_policy(inst);
  MatrixXd K = policy_with_cost(inst, population_cost(inst, kstar.K) + 3.0, 3);
  double pop = population_cost(inst, K);

  QueryLedger ledger;
  long T = truncation_horizon(inst, K, 1e-6 * pop);
  RngStream rng(11, 0, "noisy-mc");
  const int N = 20000;
  double sum = 0;
  for (int i = 0; i < N; ++i)
    sum += sample_cost_noisy(inst, K, p.distribution, rng, T, ledger);
  CHECK(sum / N == doctest::Approx(pop).epsilon(0.02));
  CHECK(ledger.total_queries == static_cast<std::uint64_t>(N));
  CHECK(ledger.total_rollout_steps ==
        static_cast<std::uint64_t>(N) * static_cast<std::uint64_t>(T));
}

TEST_CASE("random-init sampling is unbiased for the population cost") {
  Preset p = preset("lqr3x3_twopoint");
  MatrixXd K0 = policy_with_cost(p.instance, 8.0, 4);
  double pop = population_cost(p.instance, K0);
  RngStream rng(12, 0, "init-mc");
  QueryLedger ledger;
  const int N = 20000;
  double sum = 0;
  for (int i = 0; i < N; ++i)
    sum += query_one_point(p.instance, K0, p.distribution, rng, ledger,
                           RolloutMethod::Exact);
  CHECK(sum / N == doctest::Approx(pop).epsilon(0.02));
}
