#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

// Randomness with a reproducibility contract: every consumer owns a stream
// derived from (master_seed, run_index, purpose tag), and all draws go
// through our own uniform/Box-Muller implementations so sequences are
// bit-identical across platforms and standard libraries.

namespace zolqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t run_index,
            const std::string& purpose);

  std::uint64_t next_u64();
  double uniform01();           // in [0, 1)
  double normal();              // standard normal, Box-Muller
  VectorXd normal_vector(int d);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Uniform draw from the unit Frobenius sphere in D dimensions, returned as
// a flat vector; callers reshape to m x n.
VectorXd unit_sphere_direction(int D, RngStream& rng);

struct InitDistribution {
  enum class Kind { FiniteSupport, GaussianZeroMean, ScaledBasis };
  Kind kind = Kind::FiniteSupport;

  // FiniteSupport / ScaledBasis: atoms with probabilities (ScaledBasis is
  // stored as scale_i * e_i atoms with uniform weights).
  std::vector<VectorXd> atoms;
  std::vector<double> probs;

  // GaussianZeroMean
  MatrixXd covariance;
  MatrixXd chol;  // lower Cholesky factor of the covariance

  static InitDistribution finite_support(std::vector<VectorXd> atoms,
                                         std::vector<double> probs);
  static InitDistribution uniform_atoms(std::vector<VectorXd> atoms);
  static InitDistribution gaussian(const MatrixXd& covariance);
  static InitDistribution scaled_basis(const VectorXd& scales);

  int dim() const;
  MatrixXd second_moment() const;

  // Almost-sure bound on ||v||^2 for bounded laws; for Gaussian laws this
  // is the 0.999 quantile of ||v||^2 (diagnostic only, the a.s. bound does
  // not exist).
  double cn_bound() const;

  VectorXd sample(RngStream& rng) const;
};

inline VectorXd sample_init(const InitDistribution& d, RngStream& rng) {
  return d.sample(rng);
}
inline VectorXd sample_noise_step(const InitDistribution& d, RngStream& rng) {
  return d.sample(rng);
}

}  // namespace zolqr
