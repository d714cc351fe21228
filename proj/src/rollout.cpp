#include "zolqr/rollout.hpp"

#include <cmath>

namespace zolqr {

namespace {

// Exact value at one state via the dual fixed point; +inf if unstable.
double exact_value(const LqrInstance& inst, const MatrixXd& K,
                   const VectorXd& s0) {
  MatrixXd G = inst.closed_loop(K);
  if (spectral_radius(G) >= 1.0) return kInfiniteCost;
  MatrixXd M = inst.Q + K.transpose() * inst.R * K;
  MatrixXd P = solve_fixed_point(G, M, FixedPointSide::Dual);
  return s0.dot(P * s0);
}

double simulated_value(const LqrInstance& inst, const MatrixXd& K,
                       const VectorXd& s0, long horizon) {
  MatrixXd Acl = inst.A - inst.B * K;
  VectorXd s = s0;
  double cost = 0.0, disc = 1.0;
  for (long t = 0; t < horizon; ++t) {
    VectorXd u = -K * s;
    cost += disc * (s.dot(inst.Q * s) + u.dot(inst.R * u));
    if (!std::isfinite(cost) || s.squaredNorm() > 1e150) return kInfiniteCost;
    s = Acl * s;
    disc *= inst.gamma;
  }
  return cost;
}

}  // namespace

double sample_cost_randinit(const LqrInstance& inst, const MatrixXd& K,
                            const VectorXd& s0, RolloutMethod method,
                            long horizon) {
  if (method == RolloutMethod::Exact) return exact_value(inst, K, s0);
  return simulated_value(inst, K, s0, horizon);
}

std::pair<double, double> query_two_point(const LqrInstance& inst,
                                          const MatrixXd& K_plus,
                                          const MatrixXd& K_minus,
                                          const InitDistribution& init,
                                          RngStream& rng, QueryLedger& ledger) {
  VectorXd s0 = init.sample(rng);
  ledger.total_queries += 2;
  return {exact_value(inst, K_plus, s0), exact_value(inst, K_minus, s0)};
}

double query_one_point(const LqrInstance& inst, const MatrixXd& K,
                       const InitDistribution& init, RngStream& rng,
                       QueryLedger& ledger, RolloutMethod method,
                       long horizon) {
  VectorXd s0 = init.sample(rng);
  ledger.total_queries += 1;
  return sample_cost_randinit(inst, K, s0, method, horizon);
}

double sample_cost_noisy(const LqrInstance& inst, const MatrixXd& K,
                         const InitDistribution& noise, RngStream& rng,
                         long horizon, QueryLedger& ledger) {
  ledger.total_queries += 1;
  MatrixXd Acl = inst.A - inst.B * K;
  VectorXd s = VectorXd::Zero(inst.n());
  double cost = 0.0, disc = 1.0;
  for (long t = 0; t < horizon; ++t) {
    s = Acl * s + noise.sample(rng);
    disc *= inst.gamma;  // cost indexing starts at t = 1: s0 = 0 contributes 0
    VectorXd u = -K * s;
    cost += disc * (s.dot(inst.Q * s) + u.dot(inst.R * u));
    ++ledger.total_rollout_steps;
    if (!std::isfinite(cost) || s.squaredNorm() > 1e150) return kInfiniteCost;
  }
  return cost;
}

long truncation_horizon(const LqrInstance& inst, const MatrixXd& K, double tol,
                        QueryLedger* ledger) {
  if (tol <= 0) throw std::invalid_argument("tolerance must be positive");
  MatrixXd G = inst.closed_loop(K);
  double rho = spectral_radius(G);
  if (rho >= 1.0) throw UnstablePolicy(rho);
  double rho_floor = std::max(rho, 1e-6);

  // Transient factor: non-normal closed loops overshoot rho^t for small t.
  double kappa = 1.0;
  MatrixXd Gp = MatrixXd::Identity(inst.n(), inst.n());
  double scale = 1.0;
  for (int t = 1; t <= 100; ++t) {
    Gp = G * Gp;
    scale *= rho_floor;
    kappa = std::max(kappa, Gp.operatorNorm() / scale);
  }

  // The cost tail decays with the square of the state decay; noisy
  // dynamics additionally carry the explicit gamma^t weight against a
  // saturated state covariance.
  double decay = rho_floor * rho_floor;
  if (inst.mode == NoiseMode::NoisyDynamics)
    decay = std::max(decay, inst.gamma);
  decay = std::min(std::max(decay, 1e-12), 0.9999995);

  double C = population_cost(inst, K);
  const long cap = 1000000;
  double ratio = kappa * kappa * C / tol;
  if (ratio <= 1.0) return 1;
  long T = static_cast<long>(std::ceil(std::log(ratio) / std::log(1.0 / decay)));
  if (T > cap) {
    if (ledger) ledger->horizon_capped = true;
    return cap;
  }
  return std::max<long>(T, 1);
}

}  // namespace zolqr
