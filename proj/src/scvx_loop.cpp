#include "scvx/scvx_loop.hpp"

#include <fmt/core.h>

#include <cmath>
#include <random>

#include "scvx/errors.hpp"
#include "scvx/log.hpp"

namespace scvx {

void ScvxConfig::validate() const {
  if (!(0.0 <= rho0 && rho0 < rho1 && rho1 < rho2 && rho2 < 1.0))
    throw ValidationError("ratio thresholds must satisfy 0 <= rho0 < rho1 < rho2 < 1");
  if (!(shrink_factor > 1.0) || !(grow_factor > 1.0))
    throw ValidationError("trust-region factors must exceed 1");
  if (!(rho_tr_min < rho_tr_init && rho_tr_init <= rho_tr_max))
    throw ValidationError("trust-region radii must satisfy rho_tr_min < rho_tr_init <= rho_tr_max");
  if (max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (substeps < 1) throw ValidationError("substeps must be positive");
}

ReferenceTrajectory initial_guess(const Scenario& scenario) {
  scenario.validate();
  const int K = scenario.node_count;
  const CurvatureProfile prof = scenario.curvature_profile();
  const double ds = scenario.s_span / (K - 1);

  ReferenceTrajectory ref;
  ref.s_start = 0.0;
  ref.s_final = scenario.s_span;
  ref.states.resize(K);
  ref.controls.resize(K);
  ref.kappa_nodes.resize(K);

  // speeds interpolate the boundary conditions; the constant-deceleration
  // value matches them over the arc span
  const double u0_guess =
      (scenario.v_final * scenario.v_final - scenario.v0 * scenario.v0) / (2.0 * scenario.s_span);

  std::vector<double> psi(K, 0.0), tstamp(K, 0.0), delta(K, 0.0), speed(K, 0.0);
  for (int k = 0; k < K; ++k) {
    const double lam = static_cast<double>(k) / (K - 1);
    speed[k] = (1.0 - lam) * scenario.v0 + lam * scenario.v_final;
    ref.kappa_nodes[k] = prof.kappa(k * ds);
    delta[k] = std::atan(scenario.vehicle.wheelbase() * ref.kappa_nodes[k]);
  }
  for (int k = 1; k < K; ++k) {
    // path heading from the curvature integral; time from the speed profile
    psi[k] = psi[k - 1] + 0.5 * (ref.kappa_nodes[k - 1] + ref.kappa_nodes[k]) * ds;
    tstamp[k] = tstamp[k - 1] + 0.5 * (1.0 / speed[k - 1] + 1.0 / speed[k]) * ds;
  }

  for (int k = 0; k < K; ++k) {
    StateVec x = StateVec::Zero();
    x[ch::psi] = psi[k];
    x[ch::v] = speed[k];
    x[ch::delta_f] = delta[k];
    x[ch::t] = tstamp[k];
    ref.states[k] = x;

    ControlVec u;
    u[uch::accel] = u0_guess;
    if (k + 1 < K) {
      const double dt = tstamp[k + 1] - tstamp[k];
      u[uch::steer_rate] = (delta[k + 1] - delta[k]) / dt;
    } else {
      u[uch::steer_rate] = 0.0;
    }
    ref.controls[k] = u;
  }
  return ref;
}

ScalingMap scenario_scaling(const Scenario& scenario, const ReferenceTrajectory& guess) {
  StateVec x_min, x_max;
  x_min[ch::e_y] = -scenario.road_half_width;
  x_max[ch::e_y] = scenario.road_half_width;
  x_min[ch::e_psi] = -scenario.e_psi_bound;
  x_max[ch::e_psi] = scenario.e_psi_bound;

  double psi_lo = 0.0, psi_hi = 0.0;
  for (const auto& x : guess.states) {
    psi_lo = std::min(psi_lo, x[ch::psi]);
    psi_hi = std::max(psi_hi, x[ch::psi]);
  }
  x_min[ch::psi] = psi_lo - 0.5;
  x_max[ch::psi] = psi_hi + 0.5;

  x_min[ch::v] = scenario.v_min;
  x_max[ch::v] = scenario.v_max;
  x_min[ch::delta_f] = -scenario.delta_max;
  x_max[ch::delta_f] = scenario.delta_max;

  const double t_end = guess.states.back()[ch::t];
  x_min[ch::t] = 0.0;
  x_max[ch::t] = std::max(1.0, 3.0 * t_end);

  ControlVec u_min, u_max;
  u_min[uch::accel] = scenario.u0_min;
  u_max[uch::accel] = scenario.u0_max;
  u_min[uch::steer_rate] = -scenario.delta_rate_max;
  u_max[uch::steer_rate] = scenario.delta_rate_max;
  return build_scaling(x_min, x_max, u_min, u_max);
}

double nonlinear_cost(const ReferenceTrajectory& traj, const CostWeights& weights,
                      const ConstraintSpec& cons, const Scenario& scenario,
                      const ScalingMap& scaling, int substeps) {
  double defect_l1 = 0.0;
  for (int k = 0; k < traj.node_count() - 1; ++k) {
    const StateVec prop = propagate_nonlinear_interval(traj, scenario.vehicle, scenario.variant,
                                                       k, traj.states[k], substeps);
    defect_l1 +=
        ((traj.states[k + 1] - prop).cwiseQuotient(scaling.state_scale)).cwiseAbs().sum();
  }
  return soft_cost(traj, weights, cons.terminal_speed) + weights.nu * defect_l1;
}

RatioOutcome ratio_step(double prev_cost, double new_cost, double predicted_cost, double rho_tr,
                        const ScvxConfig& config) {
  RatioOutcome out;
  const double predicted_decrease = prev_cost - predicted_cost;
  if (predicted_decrease < 1e-12) {
    out.stalled = true;
    out.accept = false;
    out.new_rho_tr = rho_tr;
    return out;
  }
  const double r = (prev_cost - new_cost) / predicted_decrease;
  out.ratio = r;
  if (r < config.rho0) {
    out.accept = false;
    out.new_rho_tr = rho_tr / config.shrink_factor;
  } else if (r < config.rho1) {
    out.accept = true;
    out.new_rho_tr = rho_tr / config.shrink_factor;
  } else if (r < config.rho2) {
    out.accept = true;
    out.new_rho_tr = rho_tr;
  } else {
    out.accept = true;
    out.new_rho_tr = rho_tr * config.grow_factor;
  }
  out.new_rho_tr = std::clamp(out.new_rho_tr, config.rho_tr_min, config.rho_tr_max);
  return out;
}

ConvergedPlan run(const Scenario& scenario, const ScvxConfig& config) {
  scenario.validate();
  config.validate();

  const ConstraintSpec cons = scenario.constraint_spec();
  const std::optional<TriggerSpec> trigger = scenario.trigger_spec();

  ReferenceTrajectory ref = initial_guess(scenario);
  const ScalingMap scaling = scenario_scaling(scenario, ref);

  ConvergedPlan plan;
  double prev_cost = nonlinear_cost(ref, scenario.weights, cons, scenario, scaling, config.substeps);
  double rho = config.rho_tr_init;
  bool prev_gate_active = false;

  socp::SolveSettings solver_settings;

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    bool gate_active = false;
    if (trigger) gate_active = sigma_star(trigger->gate.eval(ref)) > 0.0;
    if (gate_active != prev_gate_active) {
      // newly switched rows may lie outside a shrunken trust region; give the
      // subproblem room to reach them
      rho = std::max(rho, config.rho_tr_init);
      prev_gate_active = gate_active;
    }
    plan.trigger_active = plan.trigger_active || gate_active;

    const DiscreteLTV ltv = foh_discretize(ref, scenario.vehicle, scenario.variant, config.substeps);
    const ConicProgram program = assemble({ltv, ref, scenario.weights, cons,
                                           gate_active && trigger ? &*trigger : nullptr, rho,
                                           scaling, scenario.vehicle, scenario.variant});
    const socp::SolveResult sol = socp::solve(program, solver_settings);

    IterationRecord rec;
    rec.index = iter;
    rec.rho_tr = rho;
    rec.solve_status = sol.status;
    rec.trigger_active = gate_active;

    if (sol.status == socp::SolveStatus::PrimalInfeasible)
      throw InternalError(
          "subproblem reported primal-infeasible; virtual control should make every "
          "subproblem feasible");
    if (!sol.has_primal()) {
      // numerical trouble: retry from the same reference with a tighter region
      log::info("scvx iter {}: solver returned {}, shrinking trust region", iter,
                socp::to_string(sol.status));
      rho = std::clamp(rho / config.shrink_factor, config.rho_tr_min, config.rho_tr_max);
      rec.trajectory = ref;
      rec.nonlinear_cost = prev_cost;
      rec.accepted = false;
      plan.history.push_back(std::move(rec));
      continue;
    }

    ExtractedSolution ext = extract(sol, program, ref, scaling);
    const double new_cost =
        nonlinear_cost(ext.trajectory, scenario.weights, cons, scenario, scaling, config.substeps);

    const RatioOutcome outcome = ratio_step(prev_cost, new_cost, ext.linear_cost, rho, config);
    rec.trajectory = ext.trajectory;
    rec.nonlinear_cost = new_cost;
    rec.predicted_cost = ext.linear_cost;
    rec.ratio = outcome.ratio;
    rec.nu_norm = ext.nu_norm;
    rec.step_inf = ext.max_step_inf;
    rec.accepted = outcome.accept;

    log::info(
        "scvx iter {:2d}: cost={:.6e} predicted={:.6e} ratio={:+.3f} rho={:.2e} nu={:.2e} "
        "step={:.2e} {}{}",
        iter, new_cost, ext.linear_cost, outcome.ratio, rho, ext.nu_norm, ext.max_step_inf,
        outcome.accept ? "accept" : "reject", gate_active ? " [trigger]" : "");

    if (outcome.stalled) {
      rec.accepted = false;
      plan.history.push_back(std::move(rec));
      plan.reason = "stalled: predicted decrease below 1e-12";
      break;
    }

    rho = outcome.new_rho_tr;
    plan.history.push_back(rec);

    if (outcome.accept) {
      ref = ext.trajectory;
      prev_cost = new_cost;
      plan.nu_norm = ext.nu_norm;
      plan.final_step_inf = ext.max_step_inf;
      if (ext.max_step_inf <= config.eps_dx && ext.nu_norm <= config.eps_nu) {
        plan.converged = true;
        plan.reason = fmt::format("step {:.2e} <= {:.1e} and nu {:.2e} <= {:.1e}",
                                  ext.max_step_inf, config.eps_dx, ext.nu_norm, config.eps_nu);
        break;
      }
    }
  }

  plan.iterations = static_cast<int>(plan.history.size());
  if (!plan.converged && plan.reason.empty()) plan.reason = "iteration limit reached";
  plan.trajectory = ref;

  const int K = ref.node_count();
  plan.time_stamps.resize(K);
  plan.s_rate_nodes.resize(K);
  plan.a_x_nodes.resize(K);
  plan.a_y_nodes.resize(K);
  for (int k = 0; k < K; ++k) {
    plan.time_stamps[k] = ref.states[k][ch::t];
    plan.s_rate_nodes[k] =
        s_rate(ArcState::from_vec(ref.states[k]), ref.kappa_nodes[k], scenario.vehicle, scenario.variant);
    plan.a_x_nodes[k] = ref.controls[k][uch::accel];
    plan.a_y_nodes[k] = lateral_accel(ref.states[k][ch::v], ref.states[k][ch::delta_f],
                                      scenario.vehicle, scenario.variant);
  }
  return plan;
}

ReferenceTrajectory randomized_feasible_reference(const Scenario& scenario, unsigned seed) {
  scenario.validate();
  const int K = scenario.node_count;
  const CurvatureProfile prof = scenario.curvature_profile();
  const double ds = scenario.s_span / (K - 1);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  ReferenceTrajectory ref;
  ref.s_start = 0.0;
  ref.s_final = scenario.s_span;
  ref.states.resize(K);
  ref.controls.resize(K);
  ref.kappa_nodes.resize(K);

  // brake toward a comfortable tail speed only
  const double v_tail = std::min(scenario.v0, std::max(8.0, scenario.v_final));
  const double u0_nom =
      (v_tail * v_tail - scenario.v0 * scenario.v0) / (2.0 * scenario.s_span);
  for (int k = 0; k < K; ++k) {
    ref.kappa_nodes[k] = prof.kappa(k * ds);
    ControlVec u;
    u[uch::accel] = u0_nom + 0.3 * unit(rng);
    u[uch::steer_rate] = 0.04 * unit(rng);
    ref.controls[k] = u;
  }

  StateVec x0 = scenario.initial_state();
  x0[ch::e_y] += 0.2 * unit(rng);
  x0[ch::e_psi] += 0.02 * unit(rng);
  ref.states[0] = x0;
  for (int k = 0; k < K - 1; ++k)
    ref.states[k + 1] =
        propagate_nonlinear_interval(ref, scenario.vehicle, scenario.variant, k, ref.states[k], 32);
  return ref;
}

TimeSchedule recover_time(const ConvergedPlan& plan) {
  TimeSchedule sched;
  const int K = plan.trajectory.node_count();
  sched.t.resize(K);
  sched.u.resize(K);
  for (int k = 0; k < K; ++k) {
    if (plan.s_rate_nodes[k] < kSdotMin)
      throw SingularityError(fmt::format("s_dot {} at node {} below the recovery guard",
                                         plan.s_rate_nodes[k], k));
    sched.t[k] = plan.trajectory.states[k][ch::t];
    sched.u[k] = plan.trajectory.controls[k];
    if (k > 0 && !(sched.t[k] > sched.t[k - 1]))
      throw SingularityError(fmt::format("time stamps not strictly increasing at node {}", k));
  }
  return sched;
}

}  // namespace scvx
