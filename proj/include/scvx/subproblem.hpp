#pragma once

#include <optional>
#include <vector>

#include "scvx/conic_program.hpp"
#include "scvx/socp_solver.hpp"
#include "scvx/transcription.hpp"
#include "scvx/vehicle_model.hpp"

namespace scvx {

struct CostWeights {
  double e_y{1.0};
  double e_psi{1.0};
  double jerk{1.0};
  double u0{1.0};
  double u1{1.0};
  double terminal{1.0};   // terminal-speed deviation
  double nu{1e5};         // virtual-force l1 penalty, scaled units
};

// Per-node lateral corridor [lower, upper] on e_y in meters.
struct Corridor {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct ConstraintSpec {
  double v_max{20.0};
  double v_min{0.15};
  double delta_max{27.0 * M_PI / 180.0};
  double delta_rate_max{60.0 * M_PI / 180.0};
  double u0_min{-8.0};
  double u0_max{8.0};
  double mu{0.6};
  double gravity{9.81};
  Corridor corridor;  // sized to the node count
  StateVec initial_state{StateVec::Zero()};
  double terminal_speed{0.5};
  bool pin_final_steering{true};
  bool pin_final_controls{true};

  double friction_radius() const { return mu * gravity; }
  void validate(int node_count) const;
};

// State-triggered constraint: when gate(z_bar) < 0 on the previous iterate,
// the affine rows constraint(z) <= 0 are enforced at the listed nodes.
struct TriggerEntry {
  int node{0};
  int channel{0};
  bool is_control{false};
  double coef{0.0};
};

struct AffineOverTrajectory {
  std::vector<TriggerEntry> terms;
  double constant{0.0};

  double eval(const ReferenceTrajectory& traj) const;
};

struct TriggerSpec {
  AffineOverTrajectory gate;                     // trigger active when gate < 0
  std::vector<AffineOverTrajectory> constraint;  // rows c(z) <= 0 when active
};

// sigma* = -min(g, 0): the analytic multiplier of the continuous
// state-triggered formulation.
double sigma_star(double gate_value);

struct SubproblemRefs {
  const DiscreteLTV& ltv;
  const ReferenceTrajectory& ref;
  const CostWeights& weights;
  const ConstraintSpec& constraints;
  const TriggerSpec* trigger;  // nullptr when absent
  double rho_tr;
  const ScalingMap& scaling;
  const VehicleParams& params;
  ModelVariant variant;
};

// Linearized friction-circle rows ||(u0, a_y_lin)|| <= mu g per node, with
// a_y linearized in (V, delta_f) about the reference.
struct FrictionRow {
  double radius;
  double ay_const;
  double ay_dv;      // d a_y / d V at the reference
  double ay_ddelta;  // d a_y / d delta_f at the reference
};
std::vector<FrictionRow> friction_rows(const ReferenceTrajectory& ref,
                                       const ConstraintSpec& cons, const VehicleParams& params,
                                       ModelVariant variant);

// Evaluates the gate on the previous iterate and, when active, returns the
// affine rows to enforce. Empty optional when the gate is inactive.
std::optional<std::vector<AffineOverTrajectory>> trigger_rows(const ReferenceTrajectory& ref,
                                                              const TriggerSpec& trigger);

ConicProgram assemble(const SubproblemRefs& refs);

struct ExtractedSolution {
  ReferenceTrajectory trajectory;
  double nu_norm{0.0};      // total l1 virtual force, scaled units
  double linear_cost{0.0};  // subproblem objective (the predicted cost)
  double max_step_inf{0.0}; // max |x_hat - x_hat_ref| over nodes and state channels
};

ExtractedSolution extract(const socp::SolveResult& solution, const ConicProgram& program,
                          const ReferenceTrajectory& ref, const ScalingMap& scaling);

// Soft portion of the cost functional evaluated on a trajectory (2-norm
// terms over physical values); shared by the subproblem objective and the
// nonlinear cost of the outer loop.
double soft_cost(const ReferenceTrajectory& traj, const CostWeights& weights,
                 double terminal_speed);

}  // namespace scvx
