#pragma once

#include <string>
#include <vector>

#include "zolqr/lqr.hpp"
#include "zolqr/sampling.hpp"

namespace zolqr {

// A benchmark instance together with its initial-state (or process-noise)
// distribution and a default initial-cost level for K0 generation.
struct Preset {
  std::string name;
  LqrInstance instance;
  InitDistribution distribution;
  double default_target_cost = 0.0;  // population-cost level for K0 (0: pick K*+gap)
};

std::vector<std::string> preset_names();

// Known names: scalar_1d, lqr3x3_twopoint, lqr3x3_diag_eps,
// lqr3x3_diag_noisy, dean_laplacian, random8x8. The last regenerates from
// its documented entry distributions given `seed`.
Preset preset(const std::string& name, std::uint64_t seed = 0);

// K0 = K* + sigma * N for a fixed Gaussian direction N drawn from `seed`,
// with sigma bisected until the population cost is within 2% of `target`
// (or exactly K* when the target is the optimal cost).
MatrixXd policy_with_cost(const LqrInstance& inst, double target_cost,
                          std::uint64_t seed);

}  // namespace zolqr
