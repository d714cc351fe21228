#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

// Exact (population-level) analytics for discrete-time LQR under linear
// state feedback u = -K s. Discounting is handled throughout by the
// substitution A -> sqrt(gamma) A, B -> sqrt(gamma) B, so the closed-loop
// matrix of interest is G = sqrt(gamma) (A - B K) and a policy is
// stabilizing iff rho(G) < 1.

namespace zolqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct UnstablePolicy : std::runtime_error {
  explicit UnstablePolicy(double rho)
      : std::runtime_error("policy is not stabilizing (spectral radius " +
                           std::to_string(rho) + " >= 1)") {}
};

struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

enum class NoiseMode { RandomInit, NoisyDynamics };

struct LqrInstance {
  MatrixXd A;  // n x n
  MatrixXd B;  // n x m
  MatrixXd Q;  // n x n, symmetric positive definite
  MatrixXd R;  // m x m, symmetric positive definite
  double gamma = 1.0;
  NoiseMode mode = NoiseMode::RandomInit;
  MatrixXd Sigma0;  // E[s0 s0^T] in RandomInit mode
  MatrixXd W;       // E[z z^T] in NoisyDynamics mode
  double Cn = 0.0;  // almost-sure bound on ||draw||^2 (+inf for Gaussian laws)

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  // Closed-loop matrix with the discount folded in.
  MatrixXd closed_loop(const MatrixXd& K) const {
    return std::sqrt(gamma) * (A - B * K);
  }

  // Seed of the state-correlation fixed point: the second moment of
  // whichever randomness the mode injects.
  const MatrixXd& correlation_seed() const {
    return mode == NoiseMode::RandomInit ? Sigma0 : W;
  }

  void validate() const;
};

struct Policy {
  MatrixXd K;  // m x n
};

struct CostMatrices {
  MatrixXd P;      // value matrix, P = M + G^T P G
  MatrixXd Sigma;  // state correlation, Sigma = S + G Sigma G^T
  MatrixXd M;      // Q + K^T R K
  MatrixXd E;      // natural-gradient factor, grad C = E * Sigma
};

enum class FixedPointSide { Primal, Dual };

double spectral_radius(const MatrixXd& M);

// Solves X = S + G^T X G (Dual) or X = S + G X G^T (Primal).
// Requires rho(G) < 1. Dense Kronecker solve for n <= 32, geometric
// iteration above that.
MatrixXd solve_fixed_point(const MatrixXd& G, const MatrixXd& S,
                           FixedPointSide side, double tol = 1e-12);

bool is_stabilizing(const LqrInstance& inst, const MatrixXd& K);

CostMatrices cost_matrices(const LqrInstance& inst, const MatrixXd& K);

// RandomInit: tr(P_K Sigma0). NoisyDynamics: gamma/(1-gamma) * tr(P_K W).
double population_cost(const LqrInstance& inst, const MatrixXd& K);

// Cost level used by the theory constants: tr(P_K), i.e. the population
// cost under the identity-covariance convention the bounds are stated in.
double identity_cost(const LqrInstance& inst, const MatrixXd& K);

MatrixXd exact_gradient(const LqrInstance& inst, const MatrixXd& K);

// Riccati value iteration on the discounted pair; returns (K*, P*).
std::pair<Policy, MatrixXd> optimal_policy(const LqrInstance& inst);

// The Lipschitz/smoothness polynomials of the cost level, plus the PL
// constant and the bounded-set ("tilde") versions used by the step-size
// calculators.
struct CurvatureBundle {
  double cK[10];         // evaluated at cost level C(K0)
  double lambda_K;       // (n / Cn) * cK8
  double lambda_tilde_K; // cK8
  double phi_K;          // cK7
  double rho_K;          // cK9
  double mu;             // sigma_min(R) / ||Sigma_{K*}||_op
  double rho_lqr;        // tilde cK9, cost level 10 C(K0) - 9 C(K*)
  double lambda_lqr;     // tilde cK8
  double phi_lqr;        // tilde cK7
  double theta;          // min{ 1/(2 phi_lqr), rho_lqr / lambda_lqr }
  double cost_K0;        // tr(P_{K0})
  double cost_star;      // tr(P*)
};

CurvatureBundle curvature_bundle(const LqrInstance& inst, const MatrixXd& K0);

}  // namespace zolqr
