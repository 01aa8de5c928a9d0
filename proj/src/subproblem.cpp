#include "scvx/subproblem.hpp"

#include <fmt/core.h>

#include <cmath>

#include "scvx/errors.hpp"

namespace scvx {

void ConstraintSpec::validate(int node_count) const {
  if (!(v_max > v_min) || !(v_min > 0.0))
    throw ValidationError(fmt::format("speed bounds must satisfy 0 < v_min < v_max, got [{}, {}]", v_min, v_max));
  if (!(delta_max > 0.0) || !(delta_rate_max > 0.0))
    throw ValidationError("steering bounds must be positive");
  if (!(u0_max > u0_min)) throw ValidationError("acceleration bounds are empty");
  if (mu < 0.0 || mu > 1.0) throw ValidationError(fmt::format("friction coefficient {} outside [0, 1]", mu));
  if (static_cast<int>(corridor.lower.size()) != node_count ||
      static_cast<int>(corridor.upper.size()) != node_count)
    throw DimensionError("corridor bounds must be sized to the node count");
  for (int k = 0; k < node_count; ++k) {
    if (!(corridor.lower[k] < corridor.upper[k]))
      throw ValidationError(fmt::format("empty corridor at node {}: [{}, {}]", k,
                                        corridor.lower[k], corridor.upper[k]));
  }
}

double AffineOverTrajectory::eval(const ReferenceTrajectory& traj) const {
  double v = constant;
  for (const auto& term : terms) {
    const double entry = term.is_control ? traj.controls[term.node][term.channel]
                                         : traj.states[term.node][term.channel];
    v += term.coef * entry;
  }
  return v;
}

double sigma_star(double gate_value) { return -std::min(gate_value, 0.0); }

std::vector<FrictionRow> friction_rows(const ReferenceTrajectory& ref,
                                       const ConstraintSpec& cons, const VehicleParams& params,
                                       ModelVariant variant) {
  const int K = ref.node_count();
  std::vector<FrictionRow> rows(K);
  for (int k = 0; k < K; ++k) {
    const double v = ref.states[k][ch::v];
    const double delta = ref.states[k][ch::delta_f];
    FrictionRow row;
    row.radius = cons.friction_radius();
    const double ay = lateral_accel(v, delta, params, variant);
    lateral_accel_gradient(v, delta, params, variant, row.ay_dv, row.ay_ddelta);
    // affine model a_y(V, delta) ~ const + dv*V + ddelta*delta
    row.ay_const = ay - row.ay_dv * v - row.ay_ddelta * delta;
    rows[k] = row;
  }
  return rows;
}

std::optional<std::vector<AffineOverTrajectory>> trigger_rows(const ReferenceTrajectory& ref,
                                                              const TriggerSpec& trigger) {
  const double sigma = sigma_star(trigger.gate.eval(ref));
  if (sigma > 0.0) return trigger.constraint;
  return std::nullopt;
}

namespace {

struct VarLayout {
  int x, u, nu_pos, nu_neg, tr_x, tr_u;
  int xi(int k, int c) const { return x + kStateDim * k + c; }
  int ui(int k, int c) const { return u + kControlDim * k + c; }
};

// Affine expression for a physical state entry in terms of scaled variables.
LinExpr phys_state(const VarLayout& v, const ScalingMap& sc, int k, int c) {
  LinExpr e;
  e.add(v.xi(k, c), sc.state_scale[c]);
  e += sc.state_offset[c];
  return e;
}

LinExpr phys_control(const VarLayout& v, const ScalingMap& sc, int k, int c) {
  LinExpr e;
  e.add(v.ui(k, c), sc.control_scale[c]);
  e += sc.control_offset[c];
  return e;
}

}  // namespace

ConicProgram assemble(const SubproblemRefs& refs) {
  const ReferenceTrajectory& ref = refs.ref;
  const int K = ref.node_count();
  if (refs.ltv.interval_count() != K - 1)
    throw DimensionError(fmt::format("LTV has {} intervals for {} nodes", refs.ltv.interval_count(), K));
  if (!(refs.rho_tr > 0.0)) throw ValidationError("trust region radius must be positive");
  refs.constraints.validate(K);

  const ScalingMap& sc = refs.scaling;
  const CostWeights& w = refs.weights;

  ProgramBuilder pb;
  VarLayout v;
  v.x = pb.add_var("x", kStateDim * K);
  v.u = pb.add_var("u", kControlDim * K);
  v.nu_pos = pb.add_var("nu_pos", kStateDim * (K - 1));
  v.nu_neg = pb.add_var("nu_neg", kStateDim * (K - 1));
  v.tr_x = pb.add_var("tr_x", kStateDim * K);
  v.tr_u = pb.add_var("tr_u", kControlDim * K);

  const StateVec d_inv = sc.state_scale.cwiseInverse();

  // (a) dynamics equalities with virtual control, in scaled variables
  for (int k = 0; k < K - 1; ++k) {
    const StateMat a_hat = d_inv.asDiagonal() * refs.ltv.A[k] * sc.state_scale.asDiagonal();
    const InputMat bm_hat = d_inv.asDiagonal() * refs.ltv.B_minus[k] * sc.control_scale.asDiagonal();
    const InputMat bp_hat = d_inv.asDiagonal() * refs.ltv.B_plus[k] * sc.control_scale.asDiagonal();
    const StateVec r_hat =
        d_inv.cwiseProduct(refs.ltv.A[k] * sc.state_offset +
                           (refs.ltv.B_minus[k] + refs.ltv.B_plus[k]) * sc.control_offset +
                           refs.ltv.F[k] + refs.ltv.w[k] - sc.state_offset);
    for (int i = 0; i < kStateDim; ++i) {
      LinExpr e;
      e.add(v.xi(k + 1, i), 1.0);
      for (int j = 0; j < kStateDim; ++j) e.add(v.xi(k, j), -a_hat(i, j));
      for (int j = 0; j < kControlDim; ++j) {
        e.add(v.ui(k, j), -bm_hat(i, j));
        e.add(v.ui(k + 1, j), -bp_hat(i, j));
      }
      e.add(v.nu_pos + kStateDim * k + i, -1.0);
      e.add(v.nu_neg + kStateDim * k + i, 1.0);
      e += -r_hat[i];
      pb.add_eq(std::move(e));
    }
  }

  // (g) boundary pins
  const StateVec x0_hat = sc.scale_state(refs.constraints.initial_state);
  for (int i = 0; i < kStateDim; ++i) {
    LinExpr e;
    e.add(v.xi(0, i), 1.0);
    e += -x0_hat[i];
    pb.add_eq(std::move(e));
  }
  if (refs.constraints.pin_final_steering) {
    LinExpr e;
    e.add(v.xi(K - 1, ch::delta_f), 1.0);
    e += -(0.0 - sc.state_offset[ch::delta_f]) / sc.state_scale[ch::delta_f];
    pb.add_eq(std::move(e));
  }
  if (refs.constraints.pin_final_controls) {
    const ControlVec uf_hat = sc.scale_control(ControlVec::Zero());
    for (int j = 0; j < kControlDim; ++j) {
      LinExpr e;
      e.add(v.ui(K - 1, j), 1.0);
      e += -uf_hat[j];
      pb.add_eq(std::move(e));
    }
  }

  // nonnegativity of the virtual-control split
  for (int i = 0; i < kStateDim * (K - 1); ++i) {
    pb.add_nonneg(LinExpr{}.add(v.nu_pos + i, 1.0));
    pb.add_nonneg(LinExpr{}.add(v.nu_neg + i, 1.0));
    pb.add_cost(v.nu_pos + i, w.nu);
    pb.add_cost(v.nu_neg + i, w.nu);
  }

  // (d) box bounds on V, delta_f, u0, u1 and (f) the e_y corridor
  const ConstraintSpec& cons = refs.constraints;
  for (int k = 0; k < K; ++k) {
    auto box = [&](const LinExpr& phys, double lo, double hi) {
      LinExpr lower(phys);
      lower += -lo;
      pb.add_nonneg(std::move(lower));
      LinExpr upper;
      for (const auto& [var, coef] : phys.terms) upper.add(var, -coef);
      upper += hi - phys.constant;
      pb.add_nonneg(std::move(upper));
    };
    box(phys_state(v, sc, k, ch::v), cons.v_min, cons.v_max);
    box(phys_state(v, sc, k, ch::delta_f), -cons.delta_max, cons.delta_max);
    box(phys_control(v, sc, k, uch::accel), cons.u0_min, cons.u0_max);
    box(phys_control(v, sc, k, uch::steer_rate), -cons.delta_rate_max, cons.delta_rate_max);
    box(phys_state(v, sc, k, ch::e_y), cons.corridor.lower[k], cons.corridor.upper[k]);
  }

  // (h) l1 trust region per node on the scaled deviations
  const double rho = refs.rho_tr;
  for (int k = 0; k < K; ++k) {
    const StateVec xr = sc.scale_state(ref.states[k]);
    const ControlVec ur = sc.scale_control(ref.controls[k]);
    LinExpr sum;
    sum += rho;
    for (int i = 0; i < kStateDim; ++i) {
      const int aux = v.tr_x + kStateDim * k + i;
      LinExpr lo = LinExpr{}.add(aux, 1.0).add(v.xi(k, i), -1.0);
      lo += xr[i];
      pb.add_nonneg(std::move(lo));
      LinExpr hi = LinExpr{}.add(aux, 1.0).add(v.xi(k, i), 1.0);
      hi += -xr[i];
      pb.add_nonneg(std::move(hi));
      sum.add(aux, -1.0);
    }
    for (int j = 0; j < kControlDim; ++j) {
      const int aux = v.tr_u + kControlDim * k + j;
      LinExpr lo = LinExpr{}.add(aux, 1.0).add(v.ui(k, j), -1.0);
      lo += ur[j];
      pb.add_nonneg(std::move(lo));
      LinExpr hi = LinExpr{}.add(aux, 1.0).add(v.ui(k, j), 1.0);
      hi += -ur[j];
      pb.add_nonneg(std::move(hi));
      sum.add(aux, -1.0);
    }
    pb.add_nonneg(std::move(sum));
  }

  // (i) state-triggered rows, gated on the previous iterate
  if (refs.trigger != nullptr) {
    if (const auto rows = trigger_rows(ref, *refs.trigger)) {
      for (const auto& row : *rows) {
        LinExpr e;  // c(z) <= 0 becomes -c(z) >= 0
        e += -row.constant;
        for (const auto& term : row.terms) {
          if (term.node < 0 || term.node >= K)
            throw ValidationError(fmt::format("trigger row references node {} of {}", term.node, K));
          if (term.is_control) {
            e.add(v.ui(term.node, term.channel), -term.coef * sc.control_scale[term.channel]);
            e += -term.coef * sc.control_offset[term.channel];
          } else {
            e.add(v.xi(term.node, term.channel), -term.coef * sc.state_scale[term.channel]);
            e += -term.coef * sc.state_offset[term.channel];
          }
        }
        pb.add_nonneg(std::move(e));
      }
    }
  }

  // (e) friction circle ||(a_x, a_y_lin)|| <= mu g per node
  const auto fr_rows = friction_rows(ref, cons, refs.params, refs.variant);
  for (int k = 0; k < K; ++k) {
    const FrictionRow& fr = fr_rows[k];
    LinExpr radius;
    radius += fr.radius;
    LinExpr ax = phys_control(v, sc, k, uch::accel);
    LinExpr ay;
    ay += fr.ay_const + fr.ay_dv * sc.state_offset[ch::v] + fr.ay_ddelta * sc.state_offset[ch::delta_f];
    ay.add(v.xi(k, ch::v), fr.ay_dv * sc.state_scale[ch::v]);
    ay.add(v.xi(k, ch::delta_f), fr.ay_ddelta * sc.state_scale[ch::delta_f]);
    pb.add_soc({std::move(radius), std::move(ax), std::move(ay)});
  }

  // (c) 2-norm soft cost terms as cone epigraphs over physical values
  auto epigraph = [&](const std::string& name, double weight, std::vector<LinExpr> entries) {
    if (weight <= 0.0 || entries.empty()) return;
    const int t = pb.add_var(name, 1);
    pb.add_cost(t, weight);
    std::vector<LinExpr> block;
    block.reserve(entries.size() + 1);
    block.push_back(LinExpr{}.add(t, 1.0));
    for (auto& e : entries) block.push_back(std::move(e));
    pb.add_soc(std::move(block));
  };

  std::vector<LinExpr> ey_entries, epsi_entries, jerk_entries, u0_entries, u1_entries;
  for (int k = 0; k < K; ++k) {
    ey_entries.push_back(phys_state(v, sc, k, ch::e_y));
    epsi_entries.push_back(phys_state(v, sc, k, ch::e_psi));
    u0_entries.push_back(phys_control(v, sc, k, uch::accel));
    u1_entries.push_back(phys_control(v, sc, k, uch::steer_rate));
    if (k + 1 < K) {
      LinExpr d;
      d.add(v.ui(k + 1, uch::accel), sc.control_scale[uch::accel]);
      d.add(v.ui(k, uch::accel), -sc.control_scale[uch::accel]);
      jerk_entries.push_back(std::move(d));
    }
  }
  epigraph("t_ey", w.e_y, std::move(ey_entries));
  epigraph("t_epsi", w.e_psi, std::move(epsi_entries));
  epigraph("t_jerk", w.jerk, std::move(jerk_entries));
  epigraph("t_u0", w.u0, std::move(u0_entries));
  epigraph("t_u1", w.u1, std::move(u1_entries));
  {
    LinExpr dv = phys_state(v, sc, K - 1, ch::v);
    dv += -cons.terminal_speed;
    std::vector<LinExpr> entry;
    entry.push_back(std::move(dv));
    epigraph("t_vN", w.terminal, std::move(entry));
  }

  return pb.finalize();
}

ExtractedSolution extract(const socp::SolveResult& solution, const ConicProgram& program,
                          const ReferenceTrajectory& ref, const ScalingMap& scaling) {
  if (!solution.has_primal())
    throw InternalError(fmt::format("extract called on a {} solve", socp::to_string(solution.status)));

  const int K = ref.node_count();
  const Eigen::VectorXd xs = program.segment(solution.primal, "x");
  const Eigen::VectorXd us = program.segment(solution.primal, "u");
  const Eigen::VectorXd nu_pos = program.segment(solution.primal, "nu_pos");
  const Eigen::VectorXd nu_neg = program.segment(solution.primal, "nu_neg");

  ExtractedSolution out;
  out.trajectory = ref;
  double step = 0.0;
  for (int k = 0; k < K; ++k) {
    const StateVec xh = xs.segment<kStateDim>(kStateDim * k);
    const ControlVec uh = us.segment<kControlDim>(kControlDim * k);
    out.trajectory.states[k] = scaling.unscale_state(xh);
    out.trajectory.controls[k] = scaling.unscale_control(uh);
    step = std::max(step, (xh - scaling.scale_state(ref.states[k])).cwiseAbs().maxCoeff());
  }
  out.nu_norm = nu_pos.sum() + nu_neg.sum();
  out.linear_cost = solution.objective;
  out.max_step_inf = step;
  return out;
}

double soft_cost(const ReferenceTrajectory& traj, const CostWeights& weights,
                 double terminal_speed) {
  const int K = traj.node_count();
  double ey_sq = 0.0, epsi_sq = 0.0, jerk_sq = 0.0, u0_sq = 0.0, u1_sq = 0.0;
  for (int k = 0; k < K; ++k) {
    ey_sq += traj.states[k][ch::e_y] * traj.states[k][ch::e_y];
    epsi_sq += traj.states[k][ch::e_psi] * traj.states[k][ch::e_psi];
    u0_sq += traj.controls[k][uch::accel] * traj.controls[k][uch::accel];
    u1_sq += traj.controls[k][uch::steer_rate] * traj.controls[k][uch::steer_rate];
    if (k + 1 < K) {
      const double d = traj.controls[k + 1][uch::accel] - traj.controls[k][uch::accel];
      jerk_sq += d * d;
    }
  }
  const double terminal_dev = std::abs(traj.states[K - 1][ch::v] - terminal_speed);
  return weights.e_y * std::sqrt(ey_sq) + weights.e_psi * std::sqrt(epsi_sq) +
         weights.jerk * std::sqrt(jerk_sq) + weights.u0 * std::sqrt(u0_sq) +
         weights.u1 * std::sqrt(u1_sq) + weights.terminal * terminal_dev;
}

}  // namespace scvx
