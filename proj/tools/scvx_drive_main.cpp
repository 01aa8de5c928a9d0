#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <random>

#include "scvx/errors.hpp"
#include "scvx/outputs.hpp"
#include "scvx/scenario.hpp"
#include "scvx/scvx_loop.hpp"
#include "scvx/transcription.hpp"

namespace {

scvx::Scenario resolve_scenario(const std::string& name_or_path) {
  for (const auto& name : scvx::preset_names()) {
    if (name == name_or_path) return scvx::preset_scenario(name);
  }
  if (std::filesystem::exists(name_or_path)) return scvx::load_scenario(name_or_path);
  throw scvx::ValidationError(fmt::format("unknown scenario '{}'; presets: {}", name_or_path,
                                          fmt::join(scvx::preset_names(), ", ")));
}

int run_plan(const std::string& scenario_name, const std::string& out_dir, int max_iter,
             int substeps, bool print_history) {
  const scvx::Scenario scenario = resolve_scenario(scenario_name);
  scvx::ScvxConfig config;
  config.max_iterations = max_iter;
  config.substeps = substeps;

  const scvx::ConvergedPlan plan = scvx::run(scenario, config);
  scvx::write_outputs(plan, scenario, out_dir);

  if (print_history) {
    fmt::print("iter        cost   predicted   ratio    rho_tr   nu_norm  accepted\n");
    for (const auto& rec : plan.history)
      fmt::print("{:4d}  {:10.4e}  {:10.4e}  {:+6.3f}  {:8.2e}  {:8.2e}  {}\n", rec.index,
                 rec.nonlinear_cost, rec.predicted_cost, rec.ratio, rec.rho_tr, rec.nu_norm,
                 rec.accepted ? "yes" : "no");
  }

  const int K = plan.trajectory.node_count();
  fmt::print("{}: {} after {} iterations ({}); terminal speed {:.3f} m/s, total time {:.3f} s\n",
             scenario.name, plan.converged ? "converged" : "not converged", plan.iterations,
             plan.reason, plan.trajectory.states[K - 1][scvx::ch::v], plan.time_stamps.back());
  fmt::print("outputs written to {}\n", out_dir);
  return plan.converged ? 0 : 2;
}

int run_check_discretization(const std::string& scenario_name, int substeps) {
  const scvx::Scenario scenario = resolve_scenario(scenario_name);
  const scvx::ReferenceTrajectory ref = scvx::randomized_feasible_reference(scenario, 42);
  const scvx::ScalingMap scaling = scvx::scenario_scaling(scenario, scvx::initial_guess(scenario));

  const scvx::DiscreteLTV ltv =
      scvx::foh_discretize(ref, scenario.vehicle, scenario.variant, substeps);
  const auto discrete = scvx::propagate(ltv, ref.states[0], ref.controls);
  const auto fine =
      scvx::integrate_ltv_fine(ref, scenario.vehicle, scenario.variant, ref.states[0], 256);

  double max_err = 0.0;
  for (int k = 0; k < ref.node_count(); ++k) {
    const double err =
        ((discrete[k] - fine[k]).cwiseQuotient(scaling.state_scale)).cwiseAbs().maxCoeff();
    max_err = std::max(max_err, err);
  }
  fmt::print("{}: max per-channel discretization error {:.3e} (scaled, substeps={})\n",
             scenario.name, max_err, substeps);
  return max_err <= 1e-6 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCvx trajectory planner for road vehicles"};
  app.require_subcommand(1);

  std::string scenario_name;
  std::string out_dir = "out";
  int max_iter = 30;
  int plan_substeps = 64;
  int check_substeps = 8;
  bool print_history = false;

  CLI::App* plan = app.add_subcommand("plan", "run the planner on a scenario");
  plan->add_option("scenario", scenario_name, "preset name or scenario JSON path")->required();
  plan->add_option("--out", out_dir, "output directory");
  plan->add_option("--max-iter", max_iter, "iteration limit");
  plan->add_option("--substeps", plan_substeps, "RK4 sub-intervals per discretization interval");
  plan->add_flag("--history", print_history, "print the iteration history");

  CLI::App* check = app.add_subcommand("check-discretization", "FOH-vs-RK discretization oracle");
  check->add_option("scenario", scenario_name, "preset name or scenario JSON path")->required();
  check->add_option("--substeps", check_substeps, "RK4 sub-intervals per discretization interval");

  CLI::App* presets = app.add_subcommand("presets", "list built-in scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed())
      return run_plan(scenario_name, out_dir, max_iter, plan_substeps, print_history);
    if (check->parsed()) return run_check_discretization(scenario_name, check_substeps);
    if (presets->parsed()) {
      for (const auto& name : scvx::preset_names()) fmt::print("{}\n", name);
      return 0;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
