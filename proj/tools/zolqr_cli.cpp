// Command-line front end: Riccati reports, single optimization runs, the
// experiment sweeps, and the property-check suites. A JSON config file can
// hold any of the flag values; flags given on the command line win.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zolqr/sweeps.hpp"
#include "zolqr/verify.hpp"

using json = nlohmann::json;
using namespace zolqr;

namespace {

Setting parse_setting(const std::string& s) {
  if (s == "one-point") return Setting::OnePointRandInit;
  if (s == "two-point") return Setting::TwoPointRandInit;
  if (s == "one-point-noisy") return Setting::OnePointNoisy;
  throw CLI::ValidationError("setting", "unknown setting '" + s + "'");
}

// Injects config-file values as leading argv entries so that explicit
// flags (parsed with a take-last policy) override them.
std::vector<std::string> merge_config(int argc, char** argv) {
  std::string config_path;
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      config_path = argv[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      config_path = a.substr(9);
    } else {
      args.push_back(a);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot read config file " + config_path);
  json cfg = json::parse(in);
  std::vector<std::string> merged;
  // keep the subcommand name(s) first, then config values, then user flags
  size_t head = 0;
  while (head < args.size() && args[head][0] != '-') merged.push_back(args[head++]);
  for (auto& [key, value] : cfg.items()) {
    std::string v = value.is_string() ? value.get<std::string>() : value.dump();
    merged.push_back("--" + key + "=" + v);
  }
  for (; head < args.size(); ++head) merged.push_back(args[head]);
  return merged;
}

void print_matrix(const char* name, const MatrixXd& M) {
  std::printf("%s =\n", name);
  for (int i = 0; i < M.rows(); ++i) {
    std::printf(" ");
    for (int j = 0; j < M.cols(); ++j) std::printf(" % .10g", M(i, j));
    std::printf("\n");
  }
}

int cmd_solve(const std::string& preset_name, std::uint64_t seed,
              double c0_level) {
  Preset p = preset(preset_name, seed);
  const LqrInstance& inst = p.instance;
  auto [kstar, Pstar] = optimal_policy(inst);
  double cstar = population_cost(inst, kstar.K);

  std::printf("preset: %s  (n=%d, m=%d, gamma=%g, mode=%s)\n",
              p.name.c_str(), inst.n(), inst.m(), inst.gamma,
              inst.mode == NoiseMode::RandomInit ? "random-init"
                                                 : "noisy-dynamics");
  print_matrix("K*", kstar.K);
  print_matrix("P*", Pstar);
  std::printf("C(K*) = %.10g\n", cstar);
  std::printf("rho(sqrt(gamma)(A - B K*)) = %.10g\n",
              spectral_radius(inst.closed_loop(kstar.K)));

  double target = c0_level > 0 ? c0_level : cstar + 3.0;
  MatrixXd K0 = policy_with_cost(inst, target, seed);
  CurvatureBundle b = curvature_bundle(inst, K0);
  std::printf("\nconstants at C(K0) = %.10g (identity-seed level %.10g):\n",
              population_cost(inst, K0), b.cost_K0);
  for (int i = 0; i < 10; ++i) std::printf("  c%d = %.6g\n", i, b.cK[i]);
  std::printf("  lambda_K = %.6g  lambda~_K = %.6g  phi_K = %.6g  rho_K = %.6g\n",
              b.lambda_K, b.lambda_tilde_K, b.phi_K, b.rho_K);
  std::printf("  mu = %.6g  rho_lqr = %.6g  lambda_lqr = %.6g  phi_lqr = %.6g  theta = %.6g\n",
              b.mu, b.rho_lqr, b.lambda_lqr, b.phi_lqr, b.theta);
  return 0;
}

int cmd_optimize(const ExperimentConfig& cfg, double eps, long iterations) {
  Preset p = preset(cfg.preset, cfg.seed);
  const LqrInstance& inst = p.instance;
  double cstar = population_cost(inst, optimal_policy(inst).first.K);
  double target = cfg.target_c0 > 0 ? cfg.target_c0 : cstar + 3.0;
  MatrixXd K0 = policy_with_cost(inst, target, cfg.seed);
  double c0 = population_cost(inst, K0);

  std::unique_ptr<CostOracle> oracle;
  if (cfg.setting == Setting::OnePointNoisy)
    oracle = std::make_unique<NoisyDynamicsOracle>(inst, p.distribution, K0);
  else
    oracle = std::make_unique<RandInitOracle>(inst, p.distribution);

  EstimatorSpec spec;
  spec.mode = cfg.setting == Setting::TwoPointRandInit
                  ? EstimatorMode::TwoPoint
                  : (cfg.minibatch > 1 ? EstimatorMode::MinibatchOnePoint
                                       : EstimatorMode::OnePoint);
  spec.minibatch = cfg.minibatch;
  spec.smoothing_radius =
      cfg.r > 0 ? cfg.r
                : default_smoothing_radius(inst, K0, eps, cfg.setting);

  OptConfig oc;
  oc.step_size = cfg.eta > 0
                     ? cfg.eta
                     : tuned_step_size(cfg.setting, eps, c0, cfg.eta_scale,
                                       spec.smoothing_radius,
                                       inst.n() * inst.m(), cfg.minibatch);
  oc.iterations = iterations;
  oc.master_seed = cfg.seed;
  oc.target_gap = eps;
  oc.cost_check_period = cfg.cost_check_period;

  RunTrace t = run_zero_order(*oracle, K0, spec, oc);
  std::printf("C(K0) = %.10g  gap0 = %.10g\n", c0, t.initial_gap);
  std::printf("eta = %.6g  r = %.6g  iterations = %ld\n", oc.step_size,
              spec.smoothing_radius, t.iterations_run);
  std::printf("final gap = %.10g  queries = %llu  reached %.3g: %s\n",
              t.final_gap,
              static_cast<unsigned long long>(t.ledger.total_queries), eps,
              t.reached_target ? "yes" : "no");
  if (t.diverged) std::printf("run diverged (left the stabilizing region)\n");
  if (t.exit_time >= 0)
    std::printf("bounded-set exit at iteration %ld\n", t.exit_time);
  return t.reached_target || !t.diverged ? 0 : 1;
}

void print_table(const SweepTable& table, const char* grid_name) {
  std::printf("%-12s %9s %14s %14s %8s\n", grid_name, "succ", "mean_q",
              "median_q", "flag");
  for (const auto& row : table.rows)
    std::printf("%-12g %6d/%-2zu %14.6g %14.6g %8s\n", row.grid_value,
                row.successes, row.runs.size(), row.mean_queries,
                row.median_queries, row.flagged ? "FLAG" : "");
  if (table.rows.size() >= 2) {
    try {
      LoglogFit fit = fit_loglog_slope(table);
      std::printf("log-log slope = %.4f (r^2 = %.4f)\n", fit.slope, fit.r2);
    } catch (const std::exception&) {
      std::printf("log-log slope unavailable (too few unflagged rows)\n");
    }
  }
}

int cmd_verify(std::uint64_t seed, const std::string& out_csv) {
  std::vector<CheckReport> reports = run_all_checks(seed);
  bool all_pass = true;
  for (const auto& r : reports) {
    std::printf("%-45s %5s  margin=% .4g  n=%ld  %s\n", r.name.c_str(),
                r.pass ? "pass" : "FAIL", r.worst_margin, r.samples,
                r.note.c_str());
    all_pass = all_pass && r.pass;
  }
  if (!out_csv.empty()) write_check_csv(reports, out_csv);
  std::printf("%zu checks, %s\n", reports.size(),
              all_pass ? "all passed" : "FAILURES PRESENT");
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-order LQR policy optimization"};
  app.require_subcommand(1);

  std::string preset_name = "scalar_1d";
  std::string setting_name = "one-point";
  std::vector<double> grid;
  ExperimentConfig cfg;
  double eps = 0.1;
  long iterations = 100000;
  double c0_level = 0.0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_csv, out_svg;

  auto add_common = [&](CLI::App* sub, bool needs_seed) {
    sub->add_option("--preset", preset_name, "instance preset name")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--setting", setting_name,
                    "one-point | two-point | one-point-noisy")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--runs", cfg.runs)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--max-queries", cfg.max_queries)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--eps", eps, "target cost gap")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--c0", c0_level, "target population cost of K0")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--eta", cfg.eta, "step size (0: tuned rule)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--eta-scale", cfg.eta_scale)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--r", cfg.r, "smoothing radius (0: default rule)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--minibatch", cfg.minibatch)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--cost-check-period", cfg.cost_check_period)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--out-csv", out_csv)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--out-svg", out_svg)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    auto* s = sub->add_option("--seed", seed, "master seed")
                  ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    if (needs_seed) s->required();
    else s->each([&](const std::string&) { seed_given = true; });
    return sub;
  };

  auto* solve = app.add_subcommand("solve", "Riccati solve + constants report");
  add_common(solve, false);

  auto* optimize = app.add_subcommand("optimize", "single optimization run");
  add_common(optimize, false);
  optimize->add_option("--iterations", iterations)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* sweep_eps_cmd =
      app.add_subcommand("sweep-eps", "query count vs tolerance");
  add_common(sweep_eps_cmd, true);
  sweep_eps_cmd->add_option("--grid", grid, "epsilon grid")
      ->delimiter(',')
      ->required();

  auto* sweep_init_cmd =
      app.add_subcommand("sweep-init", "query count vs initial cost");
  add_common(sweep_init_cmd, true);
  sweep_init_cmd->add_option("--grid", grid, "C(K0) target grid")
      ->delimiter(',')
      ->required();

  auto* sweep_batch_cmd =
      app.add_subcommand("sweep-batch", "max stable step vs batch size");
  add_common(sweep_batch_cmd, true);
  sweep_batch_cmd->add_option("--grid", grid, "minibatch size grid")
      ->delimiter(',')
      ->required();

  auto* verify_cmd = app.add_subcommand("verify", "run all property checks");
  verify_cmd->add_option("--seed", seed)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  verify_cmd->add_option("--out-csv", out_csv)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* preset_cmd = app.add_subcommand("preset", "preset utilities");
  preset_cmd->require_subcommand(1);
  auto* preset_list = preset_cmd->add_subcommand("list", "list preset names");

  try {
    std::vector<std::string> args = merge_config(argc, argv);
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());

    cfg.preset = preset_name;
    cfg.setting = parse_setting(setting_name);
    cfg.grid = grid;
    cfg.eps = eps;
    cfg.target_c0 = c0_level;
    cfg.seed = seed;
    cfg.out_csv = out_csv;
    cfg.out_svg = out_svg;

    if (preset_list->parsed()) {
      for (const auto& n : preset_names()) std::printf("%s\n", n.c_str());
      return 0;
    }
    if (solve->parsed()) return cmd_solve(preset_name, seed, c0_level);
    if (optimize->parsed()) return cmd_optimize(cfg, eps, iterations);
    if (verify_cmd->parsed()) return cmd_verify(seed, out_csv);

    SweepTable table;
    const char* grid_name = "grid";
    if (sweep_eps_cmd->parsed()) {
      table = sweep_epsilon(cfg);
      grid_name = "epsilon";
    } else if (sweep_init_cmd->parsed()) {
      table = sweep_initial_cost(cfg);
      grid_name = "C(K0)";
    } else {
      table = max_stable_step(cfg);
      grid_name = "batch k";
    }
    print_table(table, grid_name);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::fprintf(stderr, "{\"error\":\"%s\"}\n", e.what());
    return app.exit(e) ? 1 : 1;
  } catch (const std::exception& e) {
    json err = {{"error", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
}
