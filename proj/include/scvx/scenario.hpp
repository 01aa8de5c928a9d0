#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scvx/subproblem.hpp"
#include "scvx/vehicle_model.hpp"

namespace scvx {

enum class Side { Left, Right };

// Lateral keep-out window: at nodes [node_start, node_end] the vehicle must
// pass the centerline obstacle on the given side with the given clearance.
// Side::Right tightens the corridor to e_y <= -clearance (e_y > 0 is left of
// the centerline); Side::Left tightens it to e_y >= clearance.
struct ObstacleWindow {
  int node_start{0};
  int node_end{0};  // inclusive
  double clearance{0.5};
  Side side{Side::Right};

  bool operator==(const ObstacleWindow&) const = default;
};

// Terminal-speed evasion trigger: when the previous iterate cannot reach
// speed_threshold at the final node, require clearance on the given side
// over the trailing last_nodes nodes.
struct EvasionTrigger {
  double speed_threshold{1.0};
  double clearance{1.0};
  Side side{Side::Left};
  int last_nodes{2};

  bool operator==(const EvasionTrigger&) const = default;
};

struct CurvatureSpec {
  enum class Kind { Straight, ConstantRadius, Samples };
  Kind kind{Kind::Straight};
  double radius{200.0};
  std::vector<std::pair<double, double>> samples;

  CurvatureProfile build(double s_span) const;
  bool operator==(const CurvatureSpec&) const = default;
};

struct Scenario {
  std::string name{"unnamed"};
  double s_span{50.0};
  int node_count{40};
  CurvatureSpec curvature;
  double v0{20.0};
  double v_final{0.5};
  VehicleParams vehicle{};
  ModelVariant variant{ModelVariant::RobotCar};

  double v_max{20.0};
  double v_min{0.15};
  double delta_max{27.0 * M_PI / 180.0};
  double delta_rate_max{60.0 * M_PI / 180.0};
  double u0_min{-8.0};
  double u0_max{8.0};
  double mu{0.6};
  double gravity{9.81};
  double road_half_width{3.0};
  double e_psi_bound{30.0 * M_PI / 180.0};  // scaling bound on heading error

  std::vector<ObstacleWindow> obstacles;
  std::optional<EvasionTrigger> trigger;
  CostWeights weights;

  void validate() const;

  CurvatureProfile curvature_profile() const { return curvature.build(s_span); }
  StateVec initial_state() const;
  ConstraintSpec constraint_spec() const;
  std::optional<TriggerSpec> trigger_spec() const;

  bool operator==(const Scenario& other) const;
};

// Built-in scenario presets ("stop-50m", "stop-obstacle", "evasion-trigger").
std::vector<std::string> preset_names();
Scenario preset_scenario(const std::string& name);

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);
std::string serialize_scenario(const Scenario& scenario);

}  // namespace scvx
