#include "scvx/outputs.hpp"

#include <fmt/core.h>
#include <fmt/os.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "scvx/errors.hpp"
#include "scvx/scvx_loop.hpp"

namespace scvx {

ViolationSummary summarize_violations(const ConvergedPlan& plan, const Scenario& scenario,
                                      int substeps) {
  ViolationSummary v;
  const ReferenceTrajectory& traj = plan.trajectory;
  const ConstraintSpec cons = scenario.constraint_spec();
  const int K = traj.node_count();
  for (int k = 0; k < K; ++k) {
    const double a_norm = std::hypot(plan.a_x_nodes[k], plan.a_y_nodes[k]);
    v.friction_mps2 = std::max(v.friction_mps2, a_norm - cons.friction_radius());
    const double ey = traj.states[k][ch::e_y];
    v.corridor_m = std::max({v.corridor_m, cons.corridor.lower[k] - ey, ey - cons.corridor.upper[k]});
    v.delta_rad = std::max(v.delta_rad, std::abs(traj.states[k][ch::delta_f]) - cons.delta_max);
    v.steer_rate_radps =
        std::max(v.steer_rate_radps, std::abs(traj.controls[k][uch::steer_rate]) - cons.delta_rate_max);
    v.accel_mps2 = std::max({v.accel_mps2, cons.u0_min - traj.controls[k][uch::accel],
                             traj.controls[k][uch::accel] - cons.u0_max});
  }
  const ScalingMap scaling = scenario_scaling(scenario, initial_guess(scenario));
  for (int k = 0; k < K - 1; ++k) {
    const StateVec prop = propagate_nonlinear_interval(traj, scenario.vehicle, scenario.variant,
                                                       k, traj.states[k], substeps);
    const double defect =
        ((traj.states[k + 1] - prop).cwiseQuotient(scaling.state_scale)).cwiseAbs().sum();
    v.defect_scaled = std::max(v.defect_scaled, defect);
  }
  return v;
}

void write_outputs(const ConvergedPlan& plan, const Scenario& scenario, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const ReferenceTrajectory& traj = plan.trajectory;
  const int K = traj.node_count();

  {
    auto f = fmt::output_file(dir + "/trajectory.csv");
    f.print("k,s_m,t_s,e_y_m,e_psi_rad,psi_rad,v_mps,delta_rad,u0_mps2,u1_radps,a_y_mps2,a_norm_mps2,kappa_1pm\n");
    for (int k = 0; k < K; ++k) {
      const StateVec& x = traj.states[k];
      const ControlVec& u = traj.controls[k];
      const double a_norm = std::hypot(plan.a_x_nodes[k], plan.a_y_nodes[k]);
      f.print("{},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g}\n",
              k, traj.s_real(k), x[ch::t], x[ch::e_y], x[ch::e_psi], x[ch::psi], x[ch::v],
              x[ch::delta_f], u[uch::accel], u[uch::steer_rate], plan.a_y_nodes[k], a_norm,
              traj.kappa_nodes[k]);
    }
  }

  {
    auto f = fmt::output_file(dir + "/history.csv");
    f.print("iter,cost,predicted,ratio,rho_tr,nu_norm,accepted,status\n");
    for (const auto& rec : plan.history) {
      f.print("{},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{},{}\n", rec.index, rec.nonlinear_cost,
              rec.predicted_cost, rec.ratio, rec.rho_tr, rec.nu_norm, rec.accepted ? 1 : 0,
              socp::to_string(rec.solve_status));
    }
  }

  {
    const ViolationSummary v = summarize_violations(plan, scenario);
    nlohmann::json j;
    j["scenario"] = scenario.name;
    j["converged"] = plan.converged;
    j["reason"] = plan.reason;
    j["iterations"] = plan.iterations;
    j["trigger_active"] = plan.trigger_active;
    j["nu_norm"] = plan.nu_norm;
    j["final_step_inf"] = plan.final_step_inf;
    j["terminal_speed_mps"] = traj.states[K - 1][ch::v];
    j["total_time_s"] = plan.time_stamps.back();
    j["max_violation"] = {
        {"friction_mps2", v.friction_mps2},   {"corridor_m", v.corridor_m},
        {"delta_rad", v.delta_rad},           {"steer_rate_radps", v.steer_rate_radps},
        {"accel_mps2", v.accel_mps2},         {"defect_scaled", v.defect_scaled},
    };
    std::ofstream out(dir + "/diagnostics.json");
    if (!out) throw std::runtime_error(fmt::format("cannot write to '{}'", dir));
    out << j.dump(2) << "\n";
  }
}

}  // namespace scvx
