#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zolqr/presets.hpp"
#include "zolqr/zopt.hpp"

// Experiment sweeps: query complexity vs tolerance, vs initial cost, and
// the maximum stable step-size vs minibatch size, with CSV/SVG emission
// and log-log slope fits.

namespace zolqr {

enum class Setting { OnePointRandInit, TwoPointRandInit, OnePointNoisy };

struct ExperimentConfig {
  std::string preset = "scalar_1d";
  Setting setting = Setting::OnePointRandInit;
  std::vector<double> grid;  // epsilons, C(K0) targets, or batch sizes
  int runs = 20;
  std::uint64_t max_queries = 20000000;  // per-run budget
  double eps = 0.1;         // target gap for sweep_initial_cost / max_stable_step
  double target_c0 = 0.0;   // population-cost level of K0 (0: preset default)
  double eta = 0.0;         // fixed step size; 0 means use the tuned rule
  double eta_scale = 0.0;   // override the tuned rule's scale constant
  double r = 0.0;           // smoothing radius; 0 means min(sqrt(eps), stability cap)
  long minibatch = 1;
  std::uint64_t seed = 0;   // master seed; mandatory for sweep subcommands
  long cost_check_period = 1;
  std::string out_csv;
  std::string out_svg;
};

struct SweepRunResult {
  double grid_value = 0.0;
  int run_id = 0;
  std::uint64_t queries = 0;
  bool success = false;
  double final_gap = 0.0;
  long exit_time = -1;
  bool exit_before_success = false;  // crossed 10x Delta0 before succeeding
};

struct SweepRow {
  double grid_value = 0.0;
  std::vector<SweepRunResult> runs;
  int successes = 0;
  double mean_queries = 0.0;    // over successes only
  double median_queries = 0.0;  // over successes only
  bool flagged = false;         // zero successes; excluded from slope fits
};

struct SweepTable {
  std::vector<SweepRow> rows;
};

struct LoglogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Tuned step-size rule per setting (manual tuning, frozen): one-point
// eta = s1 * k * eps^2 / C0^2 with minibatch size k, two-point
// eta = s2 / C0^2. When the smoothing radius and problem dimension are
// supplied, one-point steps are further clipped (cap growing as k^0.75)
// so the update cannot carry the policy past the probe-safe radius.
double tuned_step_size(Setting setting, double eps, double c0,
                       double scale_override = 0.0, double radius = 0.0,
                       int dim = 0, long minibatch = 1);

// min(sqrt(eps), largest radius keeping K0 +- r u stabilizing over 100
// fixed probe directions). The noisy setting uses 2 sqrt(eps): its sample
// costs are noisier, and a wider perturbation lowers the estimate
// magnitude D f / r without hitting the (wide) stability margin.
double default_smoothing_radius(const LqrInstance& inst, const MatrixXd& K0,
                                double eps,
                                Setting setting = Setting::OnePointRandInit);

// Queries to reach each tolerance in config.grid at fixed K0.
SweepTable sweep_epsilon(const ExperimentConfig& config);

// Queries to reach config.eps from K0 levels given by config.grid.
SweepTable sweep_initial_cost(const ExperimentConfig& config);

// Largest step size whose success rate is >= 0.75, per batch size in
// config.grid. Row aggregates hold the step size in mean/median fields.
SweepTable max_stable_step(const ExperimentConfig& config);

LoglogFit fit_loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y);
LoglogFit fit_loglog_slope(const SweepTable& table);

void write_csv(const SweepTable& table, const std::string& path);
// One log-log series per table: (grid_value, mean aggregate).
void write_svg(const SweepTable& table, const std::string& path,
               const std::string& x_label, const std::string& y_label);

}  // namespace zolqr
