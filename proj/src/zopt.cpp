#include "zolqr/zopt.hpp"

#include <cmath>
#include <limits>

namespace zolqr {

RandInitOracle::RandInitOracle(LqrInstance inst, InitDistribution init,
                               RolloutMethod method, long horizon)
    : inst_(std::move(inst)),
      init_(std::move(init)),
      method_(method),
      horizon_(horizon) {
  optimal_cost_ = population_cost(inst_, optimal_policy(inst_).first.K);
}

double RandInitOracle::sample(const MatrixXd& K, RngStream& rng,
                              QueryLedger& ledger) const {
  return query_one_point(inst_, K, init_, rng, ledger, method_, horizon_);
}

std::pair<double, double> RandInitOracle::sample_pair(
    const MatrixXd& K_plus, const MatrixXd& K_minus, RngStream& rng,
    QueryLedger& ledger) const {
  return query_two_point(inst_, K_plus, K_minus, init_, rng, ledger);
}

double RandInitOracle::exact_cost(const MatrixXd& K) const {
  if (!is_stabilizing(inst_, K)) return kInfiniteCost;
  return population_cost(inst_, K);
}

NoisyDynamicsOracle::NoisyDynamicsOracle(LqrInstance inst,
                                         InitDistribution noise,
                                         const MatrixXd& K0,
                                         double truncation_tol, long horizon)
    : inst_(std::move(inst)), noise_(std::move(noise)) {
  horizon_ = horizon > 0 ? horizon
                         : truncation_horizon(inst_, K0, truncation_tol);
  optimal_cost_ = population_cost(inst_, optimal_policy(inst_).first.K);
}

double NoisyDynamicsOracle::sample(const MatrixXd& K, RngStream& rng,
                                   QueryLedger& ledger) const {
  return sample_cost_noisy(inst_, K, noise_, rng, horizon_, ledger);
}

std::pair<double, double> NoisyDynamicsOracle::sample_pair(
    const MatrixXd&, const MatrixXd&, RngStream&, QueryLedger&) const {
  throw std::logic_error(
      "two-point feedback is not available with noisy dynamics");
}

double NoisyDynamicsOracle::exact_cost(const MatrixXd& K) const {
  if (!is_stabilizing(inst_, K)) return kInfiniteCost;
  return population_cost(inst_, K);
}

QuadraticOracle::QuadraticOracle(MatrixXd H, VectorXd b, double noise_sd)
    : H_(std::move(H)), b_(std::move(b)), noise_sd_(noise_sd) {
  VectorXd xstar = -H_.ldlt().solve(b_);
  optimal_cost_ = 0.5 * xstar.dot(H_ * xstar) + b_.dot(xstar);
}

double QuadraticOracle::sample(const MatrixXd& x, RngStream& rng,
                               QueryLedger& ledger) const {
  ledger.total_queries += 1;
  double noise = noise_sd_ > 0 ? noise_sd_ * rng.normal() : 0.0;
  return exact_cost(x) + noise;
}

std::pair<double, double> QuadraticOracle::sample_pair(
    const MatrixXd& xp, const MatrixXd& xm, RngStream& rng,
    QueryLedger& ledger) const {
  ledger.total_queries += 2;
  double noise = noise_sd_ > 0 ? noise_sd_ * rng.normal() : 0.0;
  return {exact_cost(xp) + noise, exact_cost(xm) + noise};
}

double QuadraticOracle::exact_cost(const MatrixXd& x) const {
  VectorXd v = Eigen::Map<const VectorXd>(x.data(), x.size());
  return 0.5 * v.dot(H_ * v) + b_.dot(v);
}

GradientEstimate estimate_gradient(const CostOracle& oracle, const MatrixXd& K,
                                   const EstimatorSpec& spec, RngStream& rng,
                                   QueryLedger& ledger) {
  const int D = oracle.dims();
  const double r = spec.smoothing_radius;
  const int rows = oracle.rows(), cols = oracle.cols();

  auto direction = [&] {
    VectorXd u = unit_sphere_direction(D, rng);
    return MatrixXd(Eigen::Map<MatrixXd>(u.data(), rows, cols));
  };

  GradientEstimate out;
  if (spec.mode == EstimatorMode::TwoPoint) {
    // minibatch > 1 averages independent two-point estimates
    const long k = std::max<long>(spec.minibatch, 1);
    MatrixXd acc = MatrixXd::Zero(rows, cols);
    for (long i = 0; i < k; ++i) {
      MatrixXd U = direction();
      auto [fp, fm] = oracle.sample_pair(K + r * U, K - r * U, rng, ledger);
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        out.diverged = true;
        out.g = MatrixXd::Zero(rows, cols);
        return out;
      }
      acc += (fp - fm) * (D / (2.0 * r)) * U;
    }
    out.g = acc / static_cast<double>(k);
    return out;
  }

  const long k = spec.mode == EstimatorMode::MinibatchOnePoint ? spec.minibatch
                                                               : 1;
  MatrixXd acc = MatrixXd::Zero(rows, cols);
  for (long i = 0; i < k; ++i) {
    MatrixXd U = direction();
    double f = oracle.sample(K + r * U, rng, ledger);
    if (!std::isfinite(f)) {
      out.diverged = true;
      out.g = MatrixXd::Zero(rows, cols);
      return out;
    }
    acc += f * (D / r) * U;
  }
  out.g = acc / static_cast<double>(k);
  return out;
}

std::optional<std::uint64_t> RunTrace::queries_to_tolerance(double eps) const {
  for (size_t i = 0; i < gaps.size(); ++i)
    if (gaps[i] <= eps) return gap_queries[i];
  return std::nullopt;
}

RunTrace run_zero_order(const CostOracle& oracle, const MatrixXd& K0,
                        const EstimatorSpec& spec, const OptConfig& config) {
  RngStream rng(config.master_seed, config.run_index, "zero-order");
  RunTrace trace;
  const double opt = oracle.optimal_cost();
  trace.initial_gap = oracle.exact_cost(K0) - opt;
  double gap = trace.initial_gap;
  const double exit_level = config.bounded_set_multiplier * trace.initial_gap;

  MatrixXd K = K0;
  if (config.record_trace) {
    trace.gaps.push_back(gap);
    trace.gap_queries.push_back(0);
  }
  for (long t = 0; t < config.iterations; ++t) {
    GradientEstimate est = estimate_gradient(oracle, K, spec, rng, trace.ledger);
    if (est.diverged) {
      trace.diverged = true;
      trace.iterations_run = t;
      break;
    }
    K -= config.step_size * est.g;
    trace.iterations_run = t + 1;

    if ((t + 1) % config.cost_check_period == 0) {
      gap = oracle.exact_cost(K) - opt;
      if (config.record_trace) {
        trace.gaps.push_back(gap);
        trace.gap_queries.push_back(trace.ledger.total_queries);
      }
      if (!std::isfinite(gap)) {
        trace.diverged = true;
        if (trace.exit_time < 0) trace.exit_time = t + 1;
        break;
      }
      if (gap > exit_level && trace.exit_time < 0) trace.exit_time = t + 1;
      if (config.target_gap > 0 && !trace.reached_target &&
          gap <= config.target_gap) {
        trace.reached_target = true;
        trace.queries_at_target = trace.ledger.total_queries;
        break;
      }
    }
  }
  trace.final_gap = gap;
  trace.final_K = K;
  return trace;
}

namespace {

// The prescriptions are astronomically conservative on real instances;
// saturate instead of overflowing the integer iteration count.
long saturating_count(double v) {
  double c = std::ceil(v);
  if (!(c < 9.0e18)) return std::numeric_limits<long>::max();
  return c < 1.0 ? 1 : static_cast<long>(c);
}

double radius_theorem1(const CurvatureBundle& b, double eps) {
  const double mu = b.mu, phi = b.phi_lqr;
  return std::min({b.theta * mu / (8.0 * phi) * std::sqrt(eps / 15.0),
                   0.5 / phi * std::sqrt(eps * mu / 30.0), b.rho_lqr});
}

void check_admissible_t1(double eps, double delta0) {
  if (!(eps * std::log(120.0 * delta0 / eps) < (10.0 / 3.0) * delta0))
    throw AdmissibilityError(
        "epsilon * log(120 * Delta0 / epsilon) >= (10/3) * Delta0");
}

}  // namespace

TheoryParams theory_params(ParamKind kind, const LqrInstance& inst,
                           const MatrixXd& K0, double eps, double delta,
                           bool drop_radius_artifact) {
  CurvatureBundle b = curvature_bundle(inst, K0);
  const double delta0 = b.cost_K0 - b.cost_star;
  const double mu = b.mu, phi = b.phi_lqr, rho = b.rho_lqr,
               lambda = b.lambda_lqr;
  const double D = static_cast<double>(inst.n()) * inst.m();
  const double C0 = b.cost_K0;

  TheoryParams p;
  switch (kind) {
    case ParamKind::OnePointRandInit: {
      check_admissible_t1(eps, delta0);
      double r = radius_theorem1(b, eps);
      if (!drop_radius_artifact) r = std::min(r, 10.0 * C0 / lambda);
      const double Cn = inst.Cn;
      p.r = r;
      p.eta = std::min({eps * mu * r * r / (phi * Cn * Cn * D * D * C0 * C0),
                        1.0 / phi, rho * r / (Cn * D * C0)});
      p.T = saturating_count(4.0 / (p.eta * mu) * std::log(120.0 * delta0 / eps));
      break;
    }
    case ParamKind::TwoPointRandInit: {
      check_admissible_t1(eps, delta0);
      p.r = radius_theorem1(b, eps);
      p.eta = std::min({eps * mu / (240.0 * phi * D * lambda * lambda),
                        0.5 / phi, rho / (D * lambda)});
      p.T = saturating_count(4.0 / (p.eta * mu) * std::log(120.0 * delta0 / eps));
      break;
    }
    case ParamKind::OnePointNoisy: {
      check_admissible_t1(eps, delta0);
      p.r = radius_theorem1(b, eps);
      Eigen::SelfAdjointEigenSolver<MatrixXd> eq(inst.Q);
      const double sminQ = eq.eigenvalues().minCoeff();
      Eigen::JacobiSVD<MatrixXd> sq(inst.Q), sr(inst.R);
      const double nQ = sq.singularValues()(0), nR = sr.singularValues()(0);
      const double g = inst.gamma;
      const double cdyn0 = g / (1.0 - g) * C0;
      const double base = (D / p.r) * 2.0 * (nQ + nR * lambda * lambda) *
                          inst.Cn / (1.0 - std::sqrt(g));
      const double level = 20.0 * cdyn0 / sminQ * (1.0 - g) / g;
      const double G2 = base * base * level * level * level;
      const double Ginf = base * std::pow(level, 1.5);
      p.eta = std::min({eps * mu / (240.0 * phi * G2), 0.5 / phi, rho / Ginf});
      p.T = saturating_count(4.0 / (p.eta * mu) * std::log(120.0 * delta0 / eps));
      break;
    }
    case ParamKind::MinibatchOnePoint: {
      const double cap = std::min({1.0, 1.0 / mu, rho * rho}) * delta0 / 10.0;
      if (!(eps > 0 && eps < cap))
        throw AdmissibilityError(
            "epsilon >= min{1, 1/mu, rho_lqr^2} * Delta0 / 10");
      p.eta = std::min({1.0, 1.0 / (8.0 * phi),
                        rho / (std::sqrt(mu) / 32.0 + phi + lambda)});
      p.r = 1.0 / (8.0 * phi) *
            std::min(b.theta * mu * std::sqrt(eps / 240.0),
                     1.0 / phi * std::sqrt(eps * mu / 30.0));
      double kf = (D / p.r) * (10.0 * C0 + lambda / rho) *
                  std::sqrt(std::log(2.0 * D / delta));
      p.k = saturating_count(kf * kf * 1024.0 / (mu * eps));
      p.T = saturating_count(8.0 / (p.eta * mu) * std::log(2.0 / eps));
      break;
    }
  }
  return p;
}

}  // namespace zolqr
