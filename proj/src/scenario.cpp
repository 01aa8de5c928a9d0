#include "scvx/scenario.hpp"

#include <fmt/core.h>
#include <fmt/ranges.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "scvx/errors.hpp"

namespace scvx {

using nlohmann::json;

CurvatureProfile CurvatureSpec::build(double s_span) const {
  switch (kind) {
    case Kind::Straight:
      return CurvatureProfile::straight(0.0, s_span);
    case Kind::ConstantRadius:
      return CurvatureProfile::constant_radius(0.0, s_span, radius);
    case Kind::Samples:
      return CurvatureProfile(samples);
  }
  throw ValidationError("unknown curvature kind");
}

void Scenario::validate() const {
  vehicle.validate();
  if (node_count < 10) throw ValidationError(fmt::format("node_count {} below the minimum of 10", node_count));
  if (!(s_span > 0.0)) throw ValidationError("s_span must be positive");
  if (!(v0 > v_final) || !(v_final > 0.0))
    throw ValidationError(fmt::format("speeds must satisfy v0 > v_final > 0, got v0={} v_final={}", v0, v_final));
  if (v0 > v_max) throw ValidationError(fmt::format("v0={} exceeds v_max={}", v0, v_max));
  if (v_final < v_min) throw ValidationError(fmt::format("v_final={} below v_min={}", v_final, v_min));
  if (mu < 0.0 || mu > 1.0) throw ValidationError(fmt::format("mu={} outside [0, 1]", mu));
  if (!(road_half_width > 0.0)) throw ValidationError("road_half_width must be positive");
  for (const auto& ob : obstacles) {
    if (ob.node_start < 0 || ob.node_end >= node_count || ob.node_start > ob.node_end)
      throw ValidationError(fmt::format("obstacle window [{}, {}] outside nodes [0, {}]",
                                        ob.node_start, ob.node_end, node_count - 1));
    if (!(ob.clearance > 0.0) || ob.clearance >= road_half_width)
      throw ValidationError(fmt::format("obstacle clearance {} must lie in (0, road_half_width)", ob.clearance));
  }
  if (trigger) {
    if (trigger->last_nodes < 1 || trigger->last_nodes > node_count)
      throw ValidationError("trigger last_nodes outside node range");
    if (!(trigger->speed_threshold > 0.0)) throw ValidationError("trigger speed threshold must be positive");
    if (!(trigger->clearance > 0.0) || trigger->clearance >= road_half_width)
      throw ValidationError("trigger clearance must lie in (0, road_half_width)");
  }
  // curvature profile must cover the arc span
  const CurvatureProfile prof = curvature_profile();
  if (prof.s_min() > 0.0 || prof.s_max() < s_span)
    throw ValidationError(fmt::format("curvature profile [{}, {}] does not cover [0, {}]",
                                      prof.s_min(), prof.s_max(), s_span));
}

StateVec Scenario::initial_state() const {
  const double kappa0 = curvature_profile().kappa(0.0);
  StateVec x0 = StateVec::Zero();
  x0[ch::v] = v0;
  x0[ch::delta_f] = std::atan(vehicle.wheelbase() * kappa0);
  return x0;
}

ConstraintSpec Scenario::constraint_spec() const {
  ConstraintSpec cons;
  cons.v_max = v_max;
  cons.v_min = v_min;
  cons.delta_max = delta_max;
  cons.delta_rate_max = delta_rate_max;
  cons.u0_min = u0_min;
  cons.u0_max = u0_max;
  cons.mu = mu;
  cons.gravity = gravity;
  cons.corridor.lower.assign(node_count, -road_half_width);
  cons.corridor.upper.assign(node_count, road_half_width);
  for (const auto& ob : obstacles) {
    for (int k = ob.node_start; k <= ob.node_end; ++k) {
      if (ob.side == Side::Right)
        cons.corridor.upper[k] = std::min(cons.corridor.upper[k], -ob.clearance);
      else
        cons.corridor.lower[k] = std::max(cons.corridor.lower[k], ob.clearance);
    }
  }
  cons.initial_state = initial_state();
  cons.terminal_speed = v_final;
  return cons;
}

std::optional<TriggerSpec> Scenario::trigger_spec() const {
  if (!trigger) return std::nullopt;
  TriggerSpec spec;
  // gate: threshold - V_{K-1} (negative when the terminal speed overshoots)
  spec.gate.constant = trigger->speed_threshold;
  spec.gate.terms.push_back({node_count - 1, ch::v, false, -1.0});
  for (int k = node_count - trigger->last_nodes; k < node_count; ++k) {
    AffineOverTrajectory row;  // c(z) <= 0
    if (trigger->side == Side::Left) {
      // e_y >= clearance
      row.constant = trigger->clearance;
      row.terms.push_back({k, ch::e_y, false, -1.0});
    } else {
      // e_y <= -clearance
      row.constant = trigger->clearance;
      row.terms.push_back({k, ch::e_y, false, 1.0});
    }
    spec.constraint.push_back(std::move(row));
  }
  return spec;
}

bool Scenario::operator==(const Scenario& other) const {
  auto weights_eq = [](const CostWeights& a, const CostWeights& b) {
    return a.e_y == b.e_y && a.e_psi == b.e_psi && a.jerk == b.jerk && a.u0 == b.u0 &&
           a.u1 == b.u1 && a.terminal == b.terminal && a.nu == b.nu;
  };
  return name == other.name && s_span == other.s_span && node_count == other.node_count &&
         curvature == other.curvature && v0 == other.v0 && v_final == other.v_final &&
         vehicle.l_r == other.vehicle.l_r && vehicle.l_f == other.vehicle.l_f &&
         variant == other.variant && v_max == other.v_max && v_min == other.v_min &&
         delta_max == other.delta_max && delta_rate_max == other.delta_rate_max &&
         u0_min == other.u0_min && u0_max == other.u0_max && mu == other.mu &&
         gravity == other.gravity && road_half_width == other.road_half_width &&
         e_psi_bound == other.e_psi_bound && obstacles == other.obstacles &&
         trigger == other.trigger && weights_eq(weights, other.weights);
}

std::vector<std::string> preset_names() { return {"stop-50m", "stop-obstacle", "evasion-trigger"}; }

Scenario preset_scenario(const std::string& name) {
  Scenario sc;
  sc.curvature.kind = CurvatureSpec::Kind::ConstantRadius;
  sc.curvature.radius = 200.0;
  sc.weights.terminal = 100.0;
  if (name == "stop-50m") {
    sc.name = name;
  } else if (name == "stop-obstacle") {
    sc.name = name;
    sc.obstacles.push_back(ObstacleWindow{20, 24, 0.5, Side::Right});
  } else if (name == "evasion-trigger") {
    sc.name = name;
    sc.v0 = 25.0;
    sc.v_max = 25.0;
    sc.trigger = EvasionTrigger{1.0, 1.0, Side::Left, 2};
  } else {
    throw ValidationError(fmt::format("unknown preset '{}'; available: {}", name,
                                      fmt::join(preset_names(), ", ")));
  }
  sc.validate();
  return sc;
}

namespace {

constexpr int kSchemaVersion = 1;

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  throw ValidationError(fmt::format("side must be 'left' or 'right', got '{}'", s));
}

std::string side_to_string(Side s) { return s == Side::Left ? "left" : "right"; }

double deg2rad(double d) { return d * M_PI / 180.0; }

// reads "<key>_rad" or "<key>_deg" (and the rate variants) with a default
double angle_field(const json& j, const std::string& base, const std::string& rad_suffix,
                   const std::string& deg_suffix, double default_rad) {
  if (j.contains(base + deg_suffix)) return deg2rad(j.at(base + deg_suffix).get<double>());
  if (j.contains(base + rad_suffix)) return j.at(base + rad_suffix).get<double>();
  return default_rad;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("scenario parse error: {}", e.what()));
  }

  try {
    if (j.value("schema_version", kSchemaVersion) != kSchemaVersion)
      throw ValidationError(fmt::format("unsupported schema_version {}", j["schema_version"].get<int>()));

    Scenario sc;
    sc.name = j.value("name", sc.name);
    sc.s_span = j.value("s_span_m", sc.s_span);
    sc.node_count = j.value("node_count", sc.node_count);
    sc.v0 = j.value("v0_mps", sc.v0);
    sc.v_final = j.value("v_final_mps", sc.v_final);

    if (j.contains("curvature")) {
      const json& c = j["curvature"];
      const std::string type = c.value("type", "straight");
      if (type == "straight") {
        sc.curvature.kind = CurvatureSpec::Kind::Straight;
      } else if (type == "constant-radius") {
        sc.curvature.kind = CurvatureSpec::Kind::ConstantRadius;
        sc.curvature.radius = c.at("radius_m").get<double>();
      } else if (type == "samples") {
        sc.curvature.kind = CurvatureSpec::Kind::Samples;
        for (const auto& row : c.at("samples"))
          sc.curvature.samples.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
      } else {
        throw ValidationError(fmt::format("unknown curvature type '{}'", type));
      }
    }

    if (j.contains("vehicle")) {
      sc.vehicle.l_r = j["vehicle"].value("l_r_m", sc.vehicle.l_r);
      sc.vehicle.l_f = j["vehicle"].value("l_f_m", sc.vehicle.l_f);
    }
    const std::string variant = j.value("model_variant", "robot-car");
    if (variant == "robot-car")
      sc.variant = ModelVariant::RobotCar;
    else if (variant == "side-slip")
      sc.variant = ModelVariant::SideSlip;
    else
      throw ValidationError(fmt::format("unknown model_variant '{}'", variant));

    if (j.contains("constraints")) {
      const json& c = j["constraints"];
      sc.v_max = c.value("v_max_mps", std::max(sc.v0, sc.v_max));
      sc.v_min = c.value("v_min_mps", sc.v_min);
      sc.delta_max = angle_field(c, "delta_max", "_rad", "_deg", sc.delta_max);
      sc.delta_rate_max = angle_field(c, "delta_rate_max", "_rad_s", "_deg_s", sc.delta_rate_max);
      sc.u0_min = c.value("u0_min_mps2", sc.u0_min);
      sc.u0_max = c.value("u0_max_mps2", sc.u0_max);
      sc.mu = c.value("mu", sc.mu);
      sc.gravity = c.value("gravity_mps2", sc.gravity);
      sc.road_half_width = c.value("road_half_width_m", sc.road_half_width);
      sc.e_psi_bound = angle_field(c, "e_psi_bound", "_rad", "_deg", sc.e_psi_bound);
    } else {
      sc.v_max = std::max(sc.v0, sc.v_max);
    }

    for (const auto& o : j.value("obstacles", json::array())) {
      ObstacleWindow ob;
      ob.node_start = o.at("node_start").get<int>();
      ob.node_end = o.at("node_end").get<int>();
      ob.clearance = o.at("clearance_m").get<double>();
      ob.side = side_from_string(o.value("side", "right"));
      sc.obstacles.push_back(ob);
    }

    if (j.contains("trigger") && !j["trigger"].is_null()) {
      const json& t = j["trigger"];
      const std::string type = t.value("type", "terminal-speed-evasion");
      if (type != "terminal-speed-evasion")
        throw ValidationError(fmt::format("unknown trigger type '{}'", type));
      EvasionTrigger tr;
      tr.speed_threshold = t.value("speed_threshold_mps", tr.speed_threshold);
      tr.clearance = t.value("clearance_m", tr.clearance);
      tr.side = side_from_string(t.value("side", "left"));
      tr.last_nodes = t.value("last_nodes", tr.last_nodes);
      sc.trigger = tr;
    }

    if (j.contains("weights")) {
      const json& w = j["weights"];
      sc.weights.e_y = w.value("e_y", sc.weights.e_y);
      sc.weights.e_psi = w.value("e_psi", sc.weights.e_psi);
      sc.weights.jerk = w.value("jerk", sc.weights.jerk);
      sc.weights.u0 = w.value("u0", sc.weights.u0);
      sc.weights.u1 = w.value("u1", sc.weights.u1);
      sc.weights.terminal = w.value("terminal", sc.weights.terminal);
      sc.weights.nu = w.value("nu", sc.weights.nu);
    }

    sc.validate();
    return sc;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("scenario field error: {}", e.what()));
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open scenario file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& sc) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = sc.name;
  j["s_span_m"] = sc.s_span;
  j["node_count"] = sc.node_count;
  j["v0_mps"] = sc.v0;
  j["v_final_mps"] = sc.v_final;

  json c;
  switch (sc.curvature.kind) {
    case CurvatureSpec::Kind::Straight:
      c["type"] = "straight";
      break;
    case CurvatureSpec::Kind::ConstantRadius:
      c["type"] = "constant-radius";
      c["radius_m"] = sc.curvature.radius;
      break;
    case CurvatureSpec::Kind::Samples: {
      c["type"] = "samples";
      json rows = json::array();
      for (const auto& [s, k] : sc.curvature.samples) rows.push_back({s, k});
      c["samples"] = rows;
      break;
    }
  }
  j["curvature"] = c;

  j["vehicle"] = {{"l_r_m", sc.vehicle.l_r}, {"l_f_m", sc.vehicle.l_f}};
  j["model_variant"] = sc.variant == ModelVariant::RobotCar ? "robot-car" : "side-slip";
  j["constraints"] = {
      {"v_max_mps", sc.v_max},
      {"v_min_mps", sc.v_min},
      {"delta_max_rad", sc.delta_max},
      {"delta_rate_max_rad_s", sc.delta_rate_max},
      {"u0_min_mps2", sc.u0_min},
      {"u0_max_mps2", sc.u0_max},
      {"mu", sc.mu},
      {"gravity_mps2", sc.gravity},
      {"road_half_width_m", sc.road_half_width},
      {"e_psi_bound_rad", sc.e_psi_bound},
  };

  json obstacles = json::array();
  for (const auto& ob : sc.obstacles)
    obstacles.push_back({{"node_start", ob.node_start},
                         {"node_end", ob.node_end},
                         {"clearance_m", ob.clearance},
                         {"side", side_to_string(ob.side)}});
  j["obstacles"] = obstacles;

  if (sc.trigger) {
    j["trigger"] = {{"type", "terminal-speed-evasion"},
                    {"speed_threshold_mps", sc.trigger->speed_threshold},
                    {"clearance_m", sc.trigger->clearance},
                    {"side", side_to_string(sc.trigger->side)},
                    {"last_nodes", sc.trigger->last_nodes}};
  } else {
    j["trigger"] = nullptr;
  }

  j["weights"] = {{"e_y", sc.weights.e_y},   {"e_psi", sc.weights.e_psi},
                  {"jerk", sc.weights.jerk}, {"u0", sc.weights.u0},
                  {"u1", sc.weights.u1},     {"terminal", sc.weights.terminal},
                  {"nu", sc.weights.nu}};
  return j.dump(2);
}

}  // namespace scvx
