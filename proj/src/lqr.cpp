#include "zolqr/lqr.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace zolqr {

void LqrInstance::validate() const {
  const int nn = n(), mm = m();
  if (A.rows() != nn || A.cols() != nn || B.rows() != nn || Q.rows() != nn ||
      Q.cols() != nn || R.rows() != mm || R.cols() != mm)
    throw std::invalid_argument("inconsistent matrix dimensions");
  if (!Q.isApprox(Q.transpose(), 1e-10) || !R.isApprox(R.transpose(), 1e-10))
    throw std::invalid_argument("Q and R must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eq(Q), er(R);
  if (eq.eigenvalues().minCoeff() <= 0 || er.eigenvalues().minCoeff() <= 0)
    throw std::invalid_argument("Q and R must be positive definite");
  if (mode == NoiseMode::RandomInit) {
    if (gamma <= 0 || gamma > 1)
      throw std::invalid_argument("gamma must lie in (0, 1]");
  } else {
    if (gamma <= 0 || gamma >= 1)
      throw std::invalid_argument("gamma must lie in (0, 1) with noisy dynamics");
  }
  const MatrixXd& S = correlation_seed();
  if (S.rows() != nn || S.cols() != nn || !S.isApprox(S.transpose(), 1e-10))
    throw std::invalid_argument("correlation seed must be symmetric n x n");
}

double spectral_radius(const MatrixXd& M) {
  Eigen::EigenSolver<MatrixXd> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NoConvergence("eigenvalue iteration failed in spectral_radius");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

// vec(X) in column-major order; vec(A X B) = (B^T kron A) vec(X).
MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

MatrixXd solve_direct(const MatrixXd& G, const MatrixXd& S,
                      FixedPointSide side) {
  const int n = static_cast<int>(G.rows());
  // Dual:   X = S + G^T X G,  vec(G^T X G) = (G^T kron G^T) vec(X)
  // Primal: X = S + G X G^T,  vec(G X G^T) = (G kron G) vec(X)
  MatrixXd op = side == FixedPointSide::Dual ? kron(G.transpose(), G.transpose())
                                             : kron(G, G);
  MatrixXd lhs = MatrixXd::Identity(n * n, n * n) - op;
  VectorXd rhs = Eigen::Map<const VectorXd>(S.data(), n * n);
  VectorXd x = lhs.partialPivLu().solve(rhs);
  MatrixXd X = Eigen::Map<MatrixXd>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

MatrixXd solve_iterative(const MatrixXd& G, const MatrixXd& S,
                         FixedPointSide side, double tol) {
  const long cap = 1000000;
  MatrixXd X = S;
  for (long it = 0; it < cap; ++it) {
    MatrixXd next = side == FixedPointSide::Dual
                        ? (S + G.transpose() * X * G).eval()
                        : (S + G * X * G.transpose()).eval();
    double change = (next - X).norm();
    X = next;
    if (change <= tol * std::max(1.0, X.norm())) return 0.5 * (X + X.transpose());
  }
  throw NoConvergence("fixed-point iteration hit the iteration cap");
}

}  // namespace

MatrixXd solve_fixed_point(const MatrixXd& G, const MatrixXd& S,
                           FixedPointSide side, double tol) {
  double rho = spectral_radius(G);
  if (rho >= 1.0) throw UnstablePolicy(rho);
  if (G.rows() <= 32) return solve_direct(G, S, side);
  return solve_iterative(G, S, side, tol);
}

bool is_stabilizing(const LqrInstance& inst, const MatrixXd& K) {
  return spectral_radius(inst.closed_loop(K)) < 1.0;
}

CostMatrices cost_matrices(const LqrInstance& inst, const MatrixXd& K) {
  const double sg = std::sqrt(inst.gamma);
  MatrixXd At = sg * inst.A, Bt = sg * inst.B;
  MatrixXd G = At - Bt * K;
  CostMatrices cm;
  cm.M = inst.Q + K.transpose() * inst.R * K;
  cm.P = solve_fixed_point(G, cm.M, FixedPointSide::Dual);
  cm.Sigma = solve_fixed_point(G, inst.correlation_seed(), FixedPointSide::Primal);
  cm.E = 2.0 * ((inst.R + Bt.transpose() * cm.P * Bt) * K -
                Bt.transpose() * cm.P * At);
  return cm;
}

double population_cost(const LqrInstance& inst, const MatrixXd& K) {
  MatrixXd G = inst.closed_loop(K);
  MatrixXd M = inst.Q + K.transpose() * inst.R * K;
  MatrixXd P = solve_fixed_point(G, M, FixedPointSide::Dual);
  if (inst.mode == NoiseMode::RandomInit)
    return (P * inst.Sigma0).trace();
  return inst.gamma / (1.0 - inst.gamma) * (P * inst.W).trace();
}

double identity_cost(const LqrInstance& inst, const MatrixXd& K) {
  MatrixXd G = inst.closed_loop(K);
  MatrixXd M = inst.Q + K.transpose() * inst.R * K;
  return solve_fixed_point(G, M, FixedPointSide::Dual).trace();
}

MatrixXd exact_gradient(const LqrInstance& inst, const MatrixXd& K) {
  CostMatrices cm = cost_matrices(inst, K);
  MatrixXd g = cm.E * cm.Sigma;
  if (inst.mode == NoiseMode::NoisyDynamics)
    g *= inst.gamma / (1.0 - inst.gamma);
  return g;
}

std::pair<Policy, MatrixXd> optimal_policy(const LqrInstance& inst) {
  const double sg = std::sqrt(inst.gamma);
  MatrixXd At = sg * inst.A, Bt = sg * inst.B;
  MatrixXd P = inst.Q;
  const long cap = 100000;
  for (long it = 0; it < cap; ++it) {
    MatrixXd BtPB = inst.R + Bt.transpose() * P * Bt;
    MatrixXd BtPA = Bt.transpose() * P * At;
    MatrixXd next = inst.Q + At.transpose() * P * At -
                    BtPA.transpose() * BtPB.ldlt().solve(BtPA);
    next = 0.5 * (next + next.transpose()).eval();
    double change = (next - P).norm();
    P = next;
    if (change <= 1e-12 * P.norm()) {
      MatrixXd K = (inst.R + Bt.transpose() * P * Bt)
                       .ldlt()
                       .solve(Bt.transpose() * P * At);
      return {Policy{K}, P};
    }
  }
  throw NoConvergence(
      "Riccati value iteration did not converge; instance may not be "
      "stabilizable");
}

namespace {

double opnorm(const MatrixXd& M) {
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

// The bulleted polynomials of the cost level, evaluated for the discounted
// pair (At, Bt) at level C = tr(P_K).
void eval_constants(const MatrixXd& At, const MatrixXd& Bt, const MatrixXd& Q,
                    const MatrixXd& R, double C, double Cstar, double Cn,
                    double out[10]) {
  const double nA = opnorm(At), nB = opnorm(Bt), nQ = opnorm(Q), nR = opnorm(R);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eq(Q), er(R);
  const double sminQ = eq.eigenvalues().minCoeff();
  const double sminR = er.eigenvalues().minCoeff();
  const double gap = std::max(C - Cstar, 0.0);
  const double root = std::sqrt((nR + nB * nB * C) * gap);
  const double CQ = C / sminQ;

  out[0] = (root + nB * nA * C) / sminR;
  out[1] = std::max(CQ * root, out[0]);
  out[2] = 4.0 * CQ * CQ * nQ * nB * (nA + nB * out[1] + 1.0);
  out[3] = 8.0 * CQ * CQ * out[1] * out[1] * nR * nB * (nA + nB * out[1] + 1.0);
  out[4] = 2.0 * CQ * CQ * (out[1] + 1.0) * nR;
  out[5] = root;
  const double fR = R.norm(), fB = Bt.norm();
  const double c234 = out[2] + out[3] + out[4];
  out[6] = fR + fB * fB * (out[1] + 1.0) * c234 + fB * fB * C +
           fB * nA * c234;
  out[7] = 5.0 * out[6] * CQ + 4.0 * out[5] * CQ * CQ * nB * (nA + nB * out[1]) +
           out[1];
  out[8] = Cn * c234;
  out[9] = std::min(sminQ / (4.0 * C * nB * (nA + nB * out[1] + 1.0)), 1.0);
}

}  // namespace

CurvatureBundle curvature_bundle(const LqrInstance& inst, const MatrixXd& K0) {
  const double sg = std::sqrt(inst.gamma);
  MatrixXd At = sg * inst.A, Bt = sg * inst.B;

  CurvatureBundle b{};
  b.cost_K0 = identity_cost(inst, K0);
  auto [kstar, Pstar] = optimal_policy(inst);
  b.cost_star = Pstar.trace();

  eval_constants(At, Bt, inst.Q, inst.R, b.cost_K0, b.cost_star, inst.Cn, b.cK);

  const double n = inst.n();
  b.lambda_K = (n / inst.Cn) * b.cK[8];
  b.lambda_tilde_K = b.cK[8];
  b.phi_K = b.cK[7];
  b.rho_K = b.cK[9];

  double tilde[10];
  const double level = 10.0 * b.cost_K0 - 9.0 * b.cost_star;
  eval_constants(At, Bt, inst.Q, inst.R, level, b.cost_star, inst.Cn, tilde);
  b.rho_lqr = tilde[9];
  b.lambda_lqr = tilde[8];
  b.phi_lqr = tilde[7];
  b.theta = std::min(1.0 / (2.0 * b.phi_lqr), b.rho_lqr / b.lambda_lqr);

  // PL constant under the identity-covariance convention.
  MatrixXd G = At - Bt * kstar.K;
  MatrixXd SigStar =
      solve_fixed_point(G, MatrixXd::Identity(inst.n(), inst.n()),
                        FixedPointSide::Primal);
  Eigen::SelfAdjointEigenSolver<MatrixXd> er(inst.R);
  b.mu = er.eigenvalues().minCoeff() / opnorm(SigStar);
  return b;
}

}  // namespace zolqr
