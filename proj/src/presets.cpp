#include "zolqr/presets.hpp"

#include "zolqr/rollout.hpp"

#include <cmath>
#include <stdexcept>

namespace zolqr {

namespace {

LqrInstance make_instance(MatrixXd A, MatrixXd B, MatrixXd Q, MatrixXd R,
                          double gamma, NoiseMode mode,
                          const InitDistribution& dist) {
  LqrInstance inst;
  inst.A = std::move(A);
  inst.B = std::move(B);
  inst.Q = std::move(Q);
  inst.R = std::move(R);
  inst.gamma = gamma;
  inst.mode = mode;
  if (mode == NoiseMode::RandomInit)
    inst.Sigma0 = dist.second_moment();
  else
    inst.W = dist.second_moment();
  inst.Cn = dist.cn_bound();
  inst.validate();
  return inst;
}

Preset make_random8x8(std::uint64_t seed) {
  const int n = 8;
  // Regenerate until the draw is positive definite and stabilizable; the
  // documented entry laws make failures rare but not impossible.
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    RngStream rng(seed, attempt, "random8x8");
    MatrixXd A(n, n), B(n, n), Qr(n, n), Rr(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = 2.0 + rng.normal();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = rng.normal();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Qr(i, j) = 5.0 + rng.normal();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Rr(i, j) = 5.0 + rng.normal();
    MatrixXd Q = Qr + Qr.transpose() + 10.0 * MatrixXd::Identity(n, n);
    MatrixXd R = Rr + Rr.transpose() + 10.0 * MatrixXd::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eq(Q), er(R);
    if (eq.eigenvalues().minCoeff() <= 0 || er.eigenvalues().minCoeff() <= 0)
      continue;

    std::vector<VectorXd> cols;
    for (int i = 0; i < n; ++i) cols.push_back(MatrixXd::Identity(n, n).col(i));
    InitDistribution dist = InitDistribution::uniform_atoms(cols);
    Preset p{"random8x8",
             make_instance(A, B, Q, R, 1.0, NoiseMode::RandomInit, dist), dist,
             0.0};
    try {
      optimal_policy(p.instance);
    } catch (const NoConvergence&) {
      continue;
    }
    return p;
  }
  throw std::runtime_error("failed to generate a stabilizable random8x8 draw");
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"scalar_1d",       "lqr3x3_twopoint", "lqr3x3_diag_eps",
          "lqr3x3_diag_noisy", "dean_laplacian",  "random8x8"};
}

Preset preset(const std::string& name, std::uint64_t seed) {
  if (name == "scalar_1d") {
    MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << 5.0;
    B << 0.33;
    Q << 1.0;
    R << 1.0;
    std::vector<VectorXd> atoms;
    for (double v : {4.0, 5.0, 6.0}) {
      VectorXd a(1);
      a << v;
      atoms.push_back(a);
    }
    InitDistribution dist = InitDistribution::uniform_atoms(atoms);
    return {name, make_instance(A, B, Q, R, 1.0, NoiseMode::RandomInit, dist),
            dist, 0.0};
  }
  if (name == "lqr3x3_twopoint") {
    MatrixXd A(3, 3), B(3, 3), Q(3, 3), R(3, 3);
    A << 1, 0, -10, -1, 1, 0, 0, 0, 1;
    B << 1, -10, 0, 0, 1, 0, -1, 0, 1;
    Q << 2, -1, 0, -1, 2, -1, 0, -1, 2;
    R << 5, -3, 0, -3, 5, -2, 0, -2, 5;
    std::vector<VectorXd> atoms;
    for (int i = 0; i < 3; ++i) atoms.push_back(MatrixXd::Identity(3, 3).col(i));
    InitDistribution dist = InitDistribution::uniform_atoms(atoms);
    return {name, make_instance(A, B, Q, R, 1.0, NoiseMode::RandomInit, dist),
            dist, 0.0};
  }
  if (name == "lqr3x3_diag_eps") {
    MatrixXd I = MatrixXd::Identity(3, 3);
    VectorXd scales = VectorXd::Constant(3, std::sqrt(3.0) / 25.0);
    InitDistribution dist = InitDistribution::scaled_basis(scales);
    return {name,
            make_instance(0.1 * I, 0.01 * I, 100 * I, 100 * I, 0.9,
                          NoiseMode::RandomInit, dist),
            dist, 0.0};
  }
  if (name == "lqr3x3_diag_noisy") {
    MatrixXd I = MatrixXd::Identity(3, 3);
    InitDistribution dist = InitDistribution::gaussian(I / 25.0);
    return {name,
            make_instance(0.1 * I, 0.01 * I, 25 * I, 25 * I, 0.9,
                          NoiseMode::NoisyDynamics, dist),
            dist, 0.0};
  }
  if (name == "dean_laplacian") {
    MatrixXd A(3, 3);
    A << 1.01, 0.01, 0, 0.01, 1.01, 0.01, 0, 0.01, 1.01;
    MatrixXd I = MatrixXd::Identity(3, 3);
    std::vector<VectorXd> atoms(3, VectorXd::Zero(3));
    atoms[0] << 5, 0, 0;
    atoms[1] << 5, 5, 5;
    atoms[2] << 0, 0, 5;
    InitDistribution dist = InitDistribution::uniform_atoms(atoms);
    return {name,
            make_instance(A, I, 1e-3 * I, I, 1.0, NoiseMode::RandomInit, dist),
            dist, 0.0};
  }
  if (name == "random8x8") return make_random8x8(seed);
  throw std::invalid_argument("unknown preset: " + name);
}

MatrixXd policy_with_cost(const LqrInstance& inst, double target_cost,
                          std::uint64_t seed) {
  auto [kstar, Pstar] = optimal_policy(inst);
  const double cstar = population_cost(inst, kstar.K);
  if (target_cost < cstar * (1.0 - 1e-9))
    throw std::invalid_argument(
        "target cost " + std::to_string(target_cost) +
        " is below the optimal cost " + std::to_string(cstar));
  if (std::abs(target_cost - cstar) / std::max(target_cost, 1e-300) <= 0.02)
    return kstar.K;

  RngStream rng(seed, 0, "k0-direction");
  MatrixXd N(inst.m(), inst.n());
  for (int i = 0; i < N.rows(); ++i)
    for (int j = 0; j < N.cols(); ++j) N(i, j) = rng.normal();
  N /= N.norm();

  auto cost_at = [&](double sigma) {
    MatrixXd K = kstar.K + sigma * N;
    if (!is_stabilizing(inst, K)) return kInfiniteCost;
    return population_cost(inst, K);
  };

  double lo = 0.0, hi = 1e-6;
  int guard = 0;
  while (cost_at(hi) < target_cost) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200)
      throw std::runtime_error("could not bracket the target cost");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double c = cost_at(mid);
    if (std::isfinite(c) && std::abs(c - target_cost) / target_cost <= 0.02)
      return kstar.K + mid * N;
    (c < target_cost ? lo : hi) = mid;
  }
  throw std::runtime_error("cost bisection did not reach the 2% band");
}

}  // namespace zolqr
