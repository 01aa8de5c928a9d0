#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scvx/scenario.hpp"
#include "scvx/subproblem.hpp"
#include "scvx/transcription.hpp"

namespace scvx {

struct ScvxConfig {
  // ratio-test thresholds and trust-region factors
  double rho0{0.0};
  double rho1{0.25};
  double rho2{0.7};
  double shrink_factor{2.0};
  double grow_factor{3.2};
  double rho_tr_init{1.0};
  double rho_tr_min{1e-4};
  double rho_tr_max{10.0};
  int max_iterations{30};
  double eps_dx{1e-4};  // convergence step tolerance, scaled
  double eps_nu{1e-6};  // virtual-force tolerance, scaled
  // RK4 sub-intervals per discretization interval. The stop profiles end on
  // the steep part of the sqrt speed curve, where coarse sub-stepping leaves
  // a multiple-shooting defect floor well above eps_nu.
  int substeps{64};

  void validate() const;
};

struct IterationRecord {
  int index{0};
  ReferenceTrajectory trajectory;  // candidate of this iteration
  double nonlinear_cost{0.0};
  double predicted_cost{0.0};
  double ratio{0.0};
  double rho_tr{0.0};  // radius used by this iteration
  double nu_norm{0.0};
  double step_inf{0.0};
  bool accepted{false};
  socp::SolveStatus solve_status{socp::SolveStatus::NumericalError};
  bool trigger_active{false};
};

struct ConvergedPlan {
  ReferenceTrajectory trajectory;
  std::vector<double> time_stamps;    // per node, from the integrated t channel
  std::vector<double> s_rate_nodes;   // s_dot diagnostics per node
  std::vector<double> a_x_nodes;      // longitudinal accel (u0)
  std::vector<double> a_y_nodes;      // model lateral accel
  std::vector<IterationRecord> history;
  bool converged{false};
  std::string reason;
  int iterations{0};
  double nu_norm{0.0};
  double final_step_inf{0.0};
  bool trigger_active{false};  // gate fired on any iteration
};

struct RatioOutcome {
  bool accept{false};
  double new_rho_tr{0.0};
  double ratio{0.0};
  bool stalled{false};
};

// Trust-region ratio test and radius schedule.
RatioOutcome ratio_step(double prev_cost, double new_cost, double predicted_cost, double rho_tr,
                        const ScvxConfig& config);

// Boundary-interpolated initial guess with Ackermann-seeded steering.
ReferenceTrajectory initial_guess(const Scenario& scenario);

// Soft costs plus the w_nu-weighted l1 multiple-shooting defect (scaled).
double nonlinear_cost(const ReferenceTrajectory& traj, const CostWeights& weights,
                      const ConstraintSpec& cons, const Scenario& scenario,
                      const ScalingMap& scaling, int substeps);

ConvergedPlan run(const Scenario& scenario, const ScvxConfig& config = {});

// Per-node time stamps and the time-domain control schedule (t_k, u_k).
struct TimeSchedule {
  std::vector<double> t;
  std::vector<ControlVec> u;
};
TimeSchedule recover_time(const ConvergedPlan& plan);

// Scaling bounds for a scenario; the t channel upper bound is derived from
// the initial guess since elapsed time has no natural scenario bound.
ScalingMap scenario_scaling(const Scenario& scenario, const ReferenceTrajectory& guess);

// Dynamically consistent randomized reference for the discretization oracle:
// perturbed controls are propagated through the nonlinear model, with gentle
// braking so the speed stays high and the interval ODEs well conditioned.
ReferenceTrajectory randomized_feasible_reference(const Scenario& scenario, unsigned seed);

}  // namespace scvx
