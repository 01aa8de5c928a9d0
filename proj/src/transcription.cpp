#include "scvx/transcription.hpp"

#include <fmt/core.h>

#include <cmath>

namespace scvx {

namespace {

constexpr double kBlowupGuard = 1e12;

void check_finite(const FohInterval& iv, int k) {
  const double m = std::max({iv.A.cwiseAbs().maxCoeff(), iv.B_minus.cwiseAbs().maxCoeff(),
                             iv.B_plus.cwiseAbs().maxCoeff(), iv.F.cwiseAbs().maxCoeff(),
                             iv.w.cwiseAbs().maxCoeff()});
  if (!std::isfinite(m) || m > kBlowupGuard)
    throw IntegrationError(fmt::format("discretization blew up on interval {} (max entry {})", k, m));
}

void check_nodes(const ReferenceTrajectory& ref, const VehicleParams& params,
                 ModelVariant variant) {
  for (int k = 0; k < ref.node_count(); ++k) {
    try {
      (void)s_rate(ArcState::from_vec(ref.states[k]), ref.kappa_nodes[k], params, variant);
    } catch (const SingularityError& e) {
      throw SingularityError(fmt::format("reference node {} is singular: {}", k, e.what()));
    }
  }
}

}  // namespace

void ReferenceTrajectory::validate() const {
  if (node_count() < 2) throw ValidationError("reference trajectory needs at least two nodes");
  if (controls.size() != states.size() || kappa_nodes.size() != states.size())
    throw DimensionError("reference trajectory arrays must share the node count");
  if (!(s_final > s_start)) throw ValidationError("reference trajectory needs s_final > s_start");
}

ScalingMap build_scaling(const StateVec& state_min, const StateVec& state_max,
                         const ControlVec& control_min, const ControlVec& control_max) {
  ScalingMap map;
  for (int i = 0; i < kStateDim; ++i) {
    if (!(state_max[i] > state_min[i]))
      throw ValidationError(fmt::format("degenerate scaling range on state channel {}: [{}, {}]",
                                        i, state_min[i], state_max[i]));
    map.state_scale[i] = 0.5 * (state_max[i] - state_min[i]);
    map.state_offset[i] = 0.5 * (state_max[i] + state_min[i]);
  }
  for (int i = 0; i < kControlDim; ++i) {
    if (!(control_max[i] > control_min[i]))
      throw ValidationError(fmt::format("degenerate scaling range on control channel {}: [{}, {}]",
                                        i, control_min[i], control_max[i]));
    map.control_scale[i] = 0.5 * (control_max[i] - control_min[i]);
    map.control_offset[i] = 0.5 * (control_max[i] + control_min[i]);
  }
  return map;
}

ModelFn vehicle_model_fn(const VehicleParams& params, ModelVariant variant, double arc_span) {
  return [params, variant, arc_span](const StateVec& x, const ControlVec& u, double kappa,
                                     StateVec& f, StateMat& A, InputMat& B) {
    f = arc_span * arc_dynamics_soft(x, u, kappa, params, variant);
    dynamics_jacobians_soft(x, u, kappa, params, variant, A, B);
    A *= arc_span;
    B *= arc_span;
  };
}

ContinuousLTV linearize_at(const ReferenceTrajectory& ref, const VehicleParams& params,
                           ModelVariant variant) {
  ref.validate();
  check_nodes(ref, params, variant);
  const int K = ref.node_count();
  ContinuousLTV ltv;
  ltv.A_nodes.resize(K);
  ltv.B_nodes.resize(K);
  ltv.F_nodes.resize(K);
  ltv.w_nodes.resize(K);
  const ModelFn model = vehicle_model_fn(params, variant, ref.arc_span());
  for (int k = 0; k < K; ++k) {
    model(ref.states[k], ref.controls[k], ref.kappa_nodes[k], ltv.F_nodes[k], ltv.A_nodes[k],
          ltv.B_nodes[k]);
    ltv.w_nodes[k] = -ltv.A_nodes[k] * ref.states[k] - ltv.B_nodes[k] * ref.controls[k];
  }
  return ltv;
}

FohInterval foh_interval(const ModelFn& model, const StateVec& x_start, const ControlVec& u0,
                         const ControlVec& u1, double kappa0, double kappa1, double ds,
                         int substeps) {
  if (substeps < 1) throw ValidationError("foh_interval needs substeps >= 1");

  // Augmented system: the shooting state x, Phi (n x n), Psi_minus/Psi_plus
  // (n x m) and the F/w integrals. Phi starts at identity; the integrals
  // accumulate the Phi^{-1}-weighted integrands of the FOH solution formulas.
  struct Aug {
    StateVec x;
    StateMat phi;
    InputMat psi_m, psi_p;
    StateVec fi, wi;
  };

  auto deriv = [&](double local, const Aug& a) {
    Aug d;
    const ControlVec ur = lam_minus(local) * u0 + lam_plus(local) * u1;
    const double kap = lam_minus(local) * kappa0 + lam_plus(local) * kappa1;
    StateVec f;
    StateMat A;
    InputMat B;
    model(a.x, ur, kap, f, A, B);
    const StateMat phi_inv = a.phi.inverse();
    d.x = f;
    d.phi = A * a.phi;
    d.psi_m = phi_inv * B * lam_minus(local);
    d.psi_p = phi_inv * B * lam_plus(local);
    d.fi = phi_inv * f;
    d.wi = phi_inv * (-A * a.x - B * ur);
    return d;
  };

  auto axpy = [](const Aug& a, double h, const Aug& d) {
    Aug r;
    r.x = a.x + h * d.x;
    r.phi = a.phi + h * d.phi;
    r.psi_m = a.psi_m + h * d.psi_m;
    r.psi_p = a.psi_p + h * d.psi_p;
    r.fi = a.fi + h * d.fi;
    r.wi = a.wi + h * d.wi;
    return r;
  };

  Aug a{x_start, StateMat::Identity(), InputMat::Zero(), InputMat::Zero(), StateVec::Zero(),
        StateVec::Zero()};
  const double h = ds / substeps;
  for (int i = 0; i < substeps; ++i) {
    const double l0 = static_cast<double>(i) / substeps;
    const double lh = (i + 0.5) / substeps;
    const double l1 = static_cast<double>(i + 1) / substeps;
    const Aug k1 = deriv(l0, a);
    const Aug k2 = deriv(lh, axpy(a, 0.5 * h, k1));
    const Aug k3 = deriv(lh, axpy(a, 0.5 * h, k2));
    const Aug k4 = deriv(l1, axpy(a, h, k3));
    a.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    a.phi += h / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
    a.psi_m += h / 6.0 * (k1.psi_m + 2.0 * k2.psi_m + 2.0 * k3.psi_m + k4.psi_m);
    a.psi_p += h / 6.0 * (k1.psi_p + 2.0 * k2.psi_p + 2.0 * k3.psi_p + k4.psi_p);
    a.fi += h / 6.0 * (k1.fi + 2.0 * k2.fi + 2.0 * k3.fi + k4.fi);
    a.wi += h / 6.0 * (k1.wi + 2.0 * k2.wi + 2.0 * k3.wi + k4.wi);
  }

  FohInterval out;
  out.A = a.phi;
  out.B_minus = a.phi * a.psi_m;
  out.B_plus = a.phi * a.psi_p;
  out.F = a.phi * a.fi;
  out.w = a.phi * a.wi;
  out.x_end = a.x;
  return out;
}

DiscreteLTV foh_discretize(const ReferenceTrajectory& ref, const VehicleParams& params,
                           ModelVariant variant, int substeps) {
  ref.validate();
  check_nodes(ref, params, variant);
  const int K = ref.node_count();
  const double ds = 1.0 / (K - 1);
  const ModelFn model = vehicle_model_fn(params, variant, ref.arc_span());

  DiscreteLTV ltv;
  ltv.A.resize(K - 1);
  ltv.B_minus.resize(K - 1);
  ltv.B_plus.resize(K - 1);
  ltv.F.resize(K - 1);
  ltv.w.resize(K - 1);
  for (int k = 0; k < K - 1; ++k) {
    const FohInterval iv =
        foh_interval(model, ref.states[k], ref.controls[k], ref.controls[k + 1],
                     ref.kappa_nodes[k], ref.kappa_nodes[k + 1], ds, substeps);
    check_finite(iv, k);
    ltv.A[k] = iv.A;
    ltv.B_minus[k] = iv.B_minus;
    ltv.B_plus[k] = iv.B_plus;
    ltv.F[k] = iv.F;
    ltv.w[k] = iv.w;
  }
  return ltv;
}

std::vector<StateVec> propagate(const DiscreteLTV& ltv, const StateVec& x0,
                                const std::vector<ControlVec>& controls) {
  const int n_int = ltv.interval_count();
  if (static_cast<int>(controls.size()) != n_int + 1)
    throw DimensionError(fmt::format("propagate needs {} controls, got {}", n_int + 1, controls.size()));
  std::vector<StateVec> xs(n_int + 1);
  xs[0] = x0;
  for (int k = 0; k < n_int; ++k) {
    xs[k + 1] = ltv.A[k] * xs[k] + ltv.B_minus[k] * controls[k] + ltv.B_plus[k] * controls[k + 1] +
                ltv.F[k] + ltv.w[k];
  }
  return xs;
}

StateVec propagate_nonlinear_interval(const ReferenceTrajectory& ref,
                                      const VehicleParams& params, ModelVariant variant,
                                      int interval, const StateVec& x_start, int substeps) {
  const int K = ref.node_count();
  const double ds = 1.0 / (K - 1);
  const double span = ref.arc_span();
  const ControlVec& u0 = ref.controls[interval];
  const ControlVec& u1 = ref.controls[interval + 1];
  const double kap0 = ref.kappa_nodes[interval];
  const double kap1 = ref.kappa_nodes[interval + 1];

  auto f = [&](double local, const StateVec& x) {
    const ControlVec u = lam_minus(local) * u0 + lam_plus(local) * u1;
    const double kap = lam_minus(local) * kap0 + lam_plus(local) * kap1;
    return StateVec(span * arc_dynamics_soft(x, u, kap, params, variant));
  };

  StateVec x = x_start;
  const double h = ds / substeps;
  for (int i = 0; i < substeps; ++i) {
    const double l0 = static_cast<double>(i) / substeps;
    const double lh = (i + 0.5) / substeps;
    const double l1 = static_cast<double>(i + 1) / substeps;
    const StateVec k1 = f(l0, x);
    const StateVec k2 = f(lh, x + 0.5 * h * k1);
    const StateVec k3 = f(lh, x + 0.5 * h * k2);
    const StateVec k4 = f(l1, x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

std::vector<StateVec> integrate_ltv_fine(const ReferenceTrajectory& ref,
                                         const VehicleParams& params, ModelVariant variant,
                                         const StateVec& x0, int substeps) {
  ref.validate();
  const int K = ref.node_count();
  const double ds = 1.0 / (K - 1);
  const ModelFn model = vehicle_model_fn(params, variant, ref.arc_span());

  std::vector<StateVec> xs(K);
  xs[0] = x0;
  StateVec x_ltv = x0;
  for (int k = 0; k < K - 1; ++k) {
    // Joint integration of the shooting reference x_ref (restarted at the
    // node) and the LTV state. Driven by the reference controls the LTV
    // derivative collapses to f(x_ref) + A(x_ref) (x_ltv - x_ref).
    StateVec x_ref = ref.states[k];
    const ControlVec& u0 = ref.controls[k];
    const ControlVec& u1 = ref.controls[k + 1];
    const double kap0 = ref.kappa_nodes[k];
    const double kap1 = ref.kappa_nodes[k + 1];

    auto deriv = [&](double local, const StateVec& xr, const StateVec& xl, StateVec& dxr,
                     StateVec& dxl) {
      const ControlVec ur = lam_minus(local) * u0 + lam_plus(local) * u1;
      const double kap = lam_minus(local) * kap0 + lam_plus(local) * kap1;
      StateVec f;
      StateMat A;
      InputMat B;
      model(xr, ur, kap, f, A, B);
      dxr = f;
      dxl = f + A * (xl - xr);
    };

    const double h = ds / substeps;
    for (int i = 0; i < substeps; ++i) {
      const double l0 = static_cast<double>(i) / substeps;
      const double lh = (i + 0.5) / substeps;
      const double l1 = static_cast<double>(i + 1) / substeps;
      StateVec k1r, k1l, k2r, k2l, k3r, k3l, k4r, k4l;
      deriv(l0, x_ref, x_ltv, k1r, k1l);
      deriv(lh, x_ref + 0.5 * h * k1r, x_ltv + 0.5 * h * k1l, k2r, k2l);
      deriv(lh, x_ref + 0.5 * h * k2r, x_ltv + 0.5 * h * k2l, k3r, k3l);
      deriv(l1, x_ref + h * k3r, x_ltv + h * k3l, k4r, k4l);
      x_ref += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
      x_ltv += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
    }
    xs[k + 1] = x_ltv;
  }
  return xs;
}

}  // namespace scvx
