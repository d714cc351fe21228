#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "zolqr/lqr.hpp"
#include "zolqr/rollout.hpp"
#include "zolqr/sampling.hpp"

// Zero-order gradient estimators and the stochastic optimization loop:
// x_{t+1} = x_t - eta * g(x_t), with g built from sphere-perturbed cost
// queries. Exact cost-gap bookkeeping rides along for free (population
// costs are computable in closed form and cost no oracle queries).

namespace zolqr {

// Anything the estimators can query: LQR oracles and synthetic test
// functions alike. `sample` is one noisy evaluation (+1 query);
// `sample_pair` evaluates two points under one shared draw (+2 queries).
class CostOracle {
 public:
  virtual ~CostOracle() = default;
  virtual int rows() const = 0;  // m (policy rows)
  virtual int cols() const = 0;  // n (policy cols)
  int dims() const { return rows() * cols(); }
  virtual double sample(const MatrixXd& K, RngStream& rng,
                        QueryLedger& ledger) const = 0;
  virtual std::pair<double, double> sample_pair(const MatrixXd& K_plus,
                                                const MatrixXd& K_minus,
                                                RngStream& rng,
                                                QueryLedger& ledger) const = 0;
  virtual double exact_cost(const MatrixXd& K) const = 0;
  virtual double optimal_cost() const = 0;
};

class RandInitOracle : public CostOracle {
 public:
  RandInitOracle(LqrInstance inst, InitDistribution init,
                 RolloutMethod method = RolloutMethod::Exact, long horizon = 0);
  int rows() const override { return inst_.m(); }
  int cols() const override { return inst_.n(); }
  double sample(const MatrixXd& K, RngStream& rng,
                QueryLedger& ledger) const override;
  std::pair<double, double> sample_pair(const MatrixXd& K_plus,
                                        const MatrixXd& K_minus, RngStream& rng,
                                        QueryLedger& ledger) const override;
  double exact_cost(const MatrixXd& K) const override;
  double optimal_cost() const override { return optimal_cost_; }
  const LqrInstance& instance() const { return inst_; }

 private:
  LqrInstance inst_;
  InitDistribution init_;
  RolloutMethod method_;
  long horizon_;
  double optimal_cost_;
};

class NoisyDynamicsOracle : public CostOracle {
 public:
  // Horizon fixed at construction via the truncation rule at K0 (manual
  // override by passing horizon > 0).
  NoisyDynamicsOracle(LqrInstance inst, InitDistribution noise,
                      const MatrixXd& K0, double truncation_tol = 1e-6,
                      long horizon = 0);
  int rows() const override { return inst_.m(); }
  int cols() const override { return inst_.n(); }
  double sample(const MatrixXd& K, RngStream& rng,
                QueryLedger& ledger) const override;
  std::pair<double, double> sample_pair(const MatrixXd&, const MatrixXd&,
                                        RngStream&, QueryLedger&) const override;
  double exact_cost(const MatrixXd& K) const override;
  double optimal_cost() const override { return optimal_cost_; }
  long horizon() const { return horizon_; }

 private:
  LqrInstance inst_;
  InitDistribution noise_;
  long horizon_;
  double optimal_cost_;
};

// f(x) = 0.5 x^T H x + b^T x with optional additive observation noise,
// shared across a pair. Used by the smoothing/unbiasedness checks.
class QuadraticOracle : public CostOracle {
 public:
  QuadraticOracle(MatrixXd H, VectorXd b, double noise_sd = 0.0);
  int rows() const override { return 1; }
  int cols() const override { return static_cast<int>(b_.size()); }
  double sample(const MatrixXd& x, RngStream& rng,
                QueryLedger& ledger) const override;
  std::pair<double, double> sample_pair(const MatrixXd& xp, const MatrixXd& xm,
                                        RngStream& rng,
                                        QueryLedger& ledger) const override;
  double exact_cost(const MatrixXd& x) const override;
  double optimal_cost() const override { return optimal_cost_; }
  VectorXd gradient(const VectorXd& x) const { return H_ * x + b_; }

 private:
  MatrixXd H_;
  VectorXd b_;
  double noise_sd_;
  double optimal_cost_;
};

enum class EstimatorMode { OnePoint, TwoPoint, MinibatchOnePoint };

struct EstimatorSpec {
  EstimatorMode mode = EstimatorMode::OnePoint;
  double smoothing_radius = 0.1;
  long minibatch = 1;  // k, used by MinibatchOnePoint
};

struct GradientEstimate {
  MatrixXd g;
  bool diverged = false;  // an arm of the estimate hit the +inf sentinel
};

GradientEstimate estimate_gradient(const CostOracle& oracle, const MatrixXd& K,
                                   const EstimatorSpec& spec, RngStream& rng,
                                   QueryLedger& ledger);

struct OptConfig {
  double step_size = 1e-3;
  long iterations = 1000;
  std::uint64_t master_seed = 0;
  std::uint64_t run_index = 0;
  double bounded_set_multiplier = 10.0;
  long cost_check_period = 1;
  double target_gap = 0.0;  // > 0: early-stop when the exact gap reaches it
  bool record_trace = false;
};

struct RunTrace {
  double initial_gap = 0.0;
  double final_gap = 0.0;
  long exit_time = -1;           // first t with gap > multiplier * initial, -1 if never
  bool diverged = false;         // hit the +inf sentinel (left the stabilizing region)
  bool reached_target = false;
  std::uint64_t queries_at_target = 0;
  long iterations_run = 0;
  MatrixXd final_K;
  QueryLedger ledger;
  std::vector<double> gaps;  // populated when record_trace is set

  // Query count when the gap first fell to eps, from the recorded trace.
  std::optional<std::uint64_t> queries_to_tolerance(double eps) const;
  std::vector<std::uint64_t> gap_queries;  // ledger snapshot per recorded gap
};

RunTrace run_zero_order(const CostOracle& oracle, const MatrixXd& K0,
                        const EstimatorSpec& spec, const OptConfig& config);

enum class ParamKind {
  OnePointRandInit,
  TwoPointRandInit,
  OnePointNoisy,
  MinibatchOnePoint
};

struct AdmissibilityError : std::runtime_error {
  explicit AdmissibilityError(const std::string& inequality)
      : std::runtime_error("tolerance outside the admissible range: " +
                           inequality) {}
};

struct TheoryParams {
  double eta = 0.0;
  double r = 0.0;
  long T = 0;
  long k = 1;  // minibatch size (1 unless ParamKind::MinibatchOnePoint)
};

// Conservative step-size/radius/iteration prescriptions evaluated verbatim
// from the curvature bundle. `drop_radius_artifact` removes the
// 10 C(K0)/lambda radius cap in the one-point random-init case.
TheoryParams theory_params(ParamKind kind, const LqrInstance& inst,
                           const MatrixXd& K0, double eps, double delta = 0.01,
                           bool drop_radius_artifact = false);

}  // namespace zolqr
