#pragma once

#include <string>
#include <vector>

#include "zolqr/presets.hpp"
#include "zolqr/zopt.hpp"

// Property suites binding the exact analytics, the oracles, and the
// estimators together: finite-difference gradients, the PL inequality,
// the cost-scaling identity, local Lipschitz certificates, trace and
// uniform-cost bounds, and the smoothing identities of the sphere
// estimator. Statistical checks use a fixed 4-standard-error band.

namespace zolqr {

struct CheckReport {
  std::string name;
  long samples = 0;
  // Signed worst-case margin; >= 0 means the property held everywhere
  // (for equality checks: tolerance minus observed deviation).
  double worst_margin = 0.0;
  bool pass = false;
  std::string note;
};

CheckReport check_gradient_fd(const LqrInstance& inst, const MatrixXd& K,
                              double h = 0.0, double tol = 1e-4);

// |Cdyn - gamma/(1-gamma) Cinit| / Cinit <= 1e-10 on a matched pair of
// instances with W = Sigma0.
CheckReport check_scaling(const LqrInstance& inst, const MatrixXd& K);

CheckReport check_lipschitz_certificates(const LqrInstance& inst,
                                         const InitDistribution& init,
                                         const MatrixXd& K, long samples,
                                         std::uint64_t seed);

CheckReport check_bounds_noisy(const LqrInstance& inst, const MatrixXd& K,
                               long draws, std::uint64_t seed);

CheckReport check_smoothing_quadratic(const MatrixXd& H, const VectorXd& b,
                                      const VectorXd& x, double r,
                                      long samples, std::uint64_t seed);

CheckReport check_smoothing_lqr(const LqrInstance& inst,
                                const InitDistribution& init, const MatrixXd& K,
                                double radius_fraction, long samples,
                                std::uint64_t seed);

CheckReport check_pl(const LqrInstance& inst, long samples, std::uint64_t seed);

CheckReport check_minibatch_variance(const LqrInstance& inst,
                                     const InitDistribution& init,
                                     const MatrixXd& K, double r, long samples,
                                     std::uint64_t seed);

// Lemma-13 proxy: deviation of the k-sample mean decays as k^{-1/2}
// within a factor 2 over k in {100, 1000, 10000}.
CheckReport check_minibatch_decay(const LqrInstance& inst,
                                  const InitDistribution& init,
                                  const MatrixXd& K, double r,
                                  std::uint64_t seed);

std::vector<CheckReport> run_all_checks(std::uint64_t seed);

void write_check_csv(const std::vector<CheckReport>& reports,
                     const std::string& path);

}  // namespace zolqr
