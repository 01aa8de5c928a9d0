#pragma once

#include <string>

#include "scvx/scenario.hpp"
#include "scvx/scvx_loop.hpp"

namespace scvx {

// Writes trajectory.csv, history.csv and diagnostics.json into dir.
void write_outputs(const ConvergedPlan& plan, const Scenario& scenario, const std::string& dir);

// Constraint-violation summary reported in diagnostics.json.
struct ViolationSummary {
  double friction_mps2{0.0};     // excess over mu*g
  double corridor_m{0.0};        // excess over the e_y corridor
  double delta_rad{0.0};         // excess over |delta_f| <= delta_max
  double steer_rate_radps{0.0};  // excess over |u1| bound
  double accel_mps2{0.0};        // excess over the u0 box
  double defect_scaled{0.0};     // max l1 multiple-shooting defect per interval
};

ViolationSummary summarize_violations(const ConvergedPlan& plan, const Scenario& scenario,
                                      int substeps = 8);

}  // namespace scvx
