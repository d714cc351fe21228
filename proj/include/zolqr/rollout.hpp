#pragma once

#include <cstdint>
#include <limits>
#include <utility>

#include "zolqr/lqr.hpp"
#include "zolqr/sampling.hpp"

// Stochastic cost oracles. A "query" is one cost evaluation; the ledger
// counts them exactly (one-point +1, two-point +2, minibatch-k +k).
// Unstable policies yield a +inf sentinel from the sampling paths instead
// of throwing, so the optimizer can record divergence events.

namespace zolqr {

struct QueryLedger {
  std::uint64_t total_queries = 0;
  std::uint64_t total_rollout_steps = 0;
  bool horizon_capped = false;
};

enum class RolloutMethod { Exact, Simulated };

constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

// Cost of running policy K from the fixed initial state s0.
// Exact: s0^T P_K s0 (infinite-horizon value). Simulated: truncated
// discounted rollout over `horizon` steps with an overflow guard.
double sample_cost_randinit(const LqrInstance& inst, const MatrixXd& K,
                            const VectorXd& s0, RolloutMethod method,
                            long horizon = 0);

// Two costs sharing one initial-state draw; ledger += 2.
std::pair<double, double> query_two_point(const LqrInstance& inst,
                                          const MatrixXd& K_plus,
                                          const MatrixXd& K_minus,
                                          const InitDistribution& init,
                                          RngStream& rng, QueryLedger& ledger);

// One-point oracle for the random-initialization model; ledger += 1.
double query_one_point(const LqrInstance& inst, const MatrixXd& K,
                       const InitDistribution& init, RngStream& rng,
                       QueryLedger& ledger, RolloutMethod method,
                       long horizon = 0);

// Noisy-dynamics rollout from s0 = 0 with fresh process noise each step;
// always simulated (the draw is the entire noise trajectory); ledger += 1.
double sample_cost_noisy(const LqrInstance& inst, const MatrixXd& K,
                         const InitDistribution& noise, RngStream& rng,
                         long horizon, QueryLedger& ledger);

// Smallest T with rho_hat^T * kappa * C(K) <= tol, where
// rho_hat = max(rho(sqrt(gamma)(A - BK)), sqrt(gamma)) and kappa bounds the
// transient growth of the closed-loop powers. Capped at 1e6 (sets the
// ledger warning flag).
long truncation_horizon(const LqrInstance& inst, const MatrixXd& K, double tol,
                        QueryLedger* ledger = nullptr);

}  // namespace zolqr
