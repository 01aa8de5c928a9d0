#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "scvx/vehicle_model.hpp"

namespace scvx {

// Reference trajectory z_bar over K nodes; the normalized grid is uniform,
// s_nodes[k] = k/(K-1), and maps affinely onto [s_start, s_final] meters.
struct ReferenceTrajectory {
  std::vector<StateVec> states;      // K
  std::vector<ControlVec> controls;  // K
  std::vector<double> kappa_nodes;   // K, curvature at each node
  double s_start{0.0};
  double s_final{0.0};

  int node_count() const { return static_cast<int>(states.size()); }
  double arc_span() const { return s_final - s_start; }
  double s_norm(int k) const { return static_cast<double>(k) / (node_count() - 1); }
  double s_real(int k) const { return s_start + s_norm(k) * arc_span(); }
  void validate() const;
};

// FOH interpolation weights on a unit interval: lam_minus + lam_plus = 1.
inline double lam_minus(double local) { return 1.0 - local; }
inline double lam_plus(double local) { return local; }

// Per-interval discrete LTV matrices of the FOH transcription:
//   x_{k+1} = A_k x_k + B_minus_k u_k + B_plus_k u_{k+1} + F_k + w_k.
struct DiscreteLTV {
  std::vector<StateMat> A;
  std::vector<InputMat> B_minus;
  std::vector<InputMat> B_plus;
  std::vector<StateVec> F;
  std::vector<StateVec> w;

  int interval_count() const { return static_cast<int>(A.size()); }
};

// Affine map between physical and normalized variables: x = D x_hat + C.
struct ScalingMap {
  StateVec state_scale{StateVec::Ones()};
  StateVec state_offset{StateVec::Zero()};
  ControlVec control_scale{ControlVec::Ones()};
  ControlVec control_offset{ControlVec::Zero()};

  StateVec scale_state(const StateVec& x) const {
    return (x - state_offset).cwiseQuotient(state_scale);
  }
  StateVec unscale_state(const StateVec& xh) const {
    return state_scale.cwiseProduct(xh) + state_offset;
  }
  ControlVec scale_control(const ControlVec& u) const {
    return (u - control_offset).cwiseQuotient(control_scale);
  }
  ControlVec unscale_control(const ControlVec& uh) const {
    return control_scale.cwiseProduct(uh) + control_offset;
  }
};

// D = diag((max-min)/2), C = (max+min)/2 per channel, so that the stated
// bounds map onto [-1, 1]. Throws ValidationError on a degenerate range.
ScalingMap build_scaling(const StateVec& state_min, const StateVec& state_max,
                         const ControlVec& control_min, const ControlVec& control_max);

// Continuous linearization about the reference. The affine model
//   x' ~ A(s) x + B(s) u + F(s) + w(s),  w := -A x_bar - B u_bar
// is evaluable anywhere on an interval: controls and curvature interpolate
// per FOH, and the in-interval state restarts from the node reference in a
// multiple-shooting fashion. The node-exact coefficients are stored here.
// All derivatives are per unit of normalized s (pre-multiplied by the span).
struct ContinuousLTV {
  std::vector<StateMat> A_nodes;
  std::vector<InputMat> B_nodes;
  std::vector<StateVec> F_nodes;
  std::vector<StateVec> w_nodes;
};

// Throws SingularityError if any reference node violates the s_dot guard.
ContinuousLTV linearize_at(const ReferenceTrajectory& ref, const VehicleParams& params,
                           ModelVariant variant);

// Model callback for the generic FOH interval integrator: given (x, u, kappa)
// fill f = dx/d(sigma), A = df/dx, B = df/du on the normalized scale.
using ModelFn = std::function<void(const StateVec& x, const ControlVec& u, double kappa,
                                   StateVec& f, StateMat& A, InputMat& B)>;

struct FohInterval {
  StateMat A;
  InputMat B_minus;
  InputMat B_plus;
  StateVec F;
  StateVec w;
  StateVec x_end;  // shooting propagation of the start state
};

// One multiple-shooting FOH interval: integrates the shooting state, the
// fundamental matrix Phi and the four weighted integrals in a single
// fixed-step RK4 pass. Coefficients are evaluated along the propagated
// state with FOH-interpolated controls and curvature, which makes the
// discrete map reproduce the shooting propagation exactly at the reference
// controls (the virtual control then measures the true shooting defect).
FohInterval foh_interval(const ModelFn& model, const StateVec& x_start, const ControlVec& u0,
                         const ControlVec& u1, double kappa0, double kappa1, double ds,
                         int substeps);

// Multiple-shooting FOH transcription: each interval's transition map is
// computed independently about the local reference and the recurrence
// restarts from the arriving state at every node.
DiscreteLTV foh_discretize(const ReferenceTrajectory& ref, const VehicleParams& params,
                           ModelVariant variant, int substeps = 8);

// Applies the discrete recurrence from x0 under the given control sequence.
std::vector<StateVec> propagate(const DiscreteLTV& ltv, const StateVec& x0,
                                const std::vector<ControlVec>& controls);

// Oracle companion to foh_discretize: fine fixed-step RK4 integration of the
// same piecewise continuous LTV (coefficients along the FOH-interpolated
// reference), carrying the LTV state across nodes from x0.
std::vector<StateVec> integrate_ltv_fine(const ReferenceTrajectory& ref,
                                         const VehicleParams& params, ModelVariant variant,
                                         const StateVec& x0, int substeps);

// Nonlinear propagation of one interval under FOH controls, with the
// saturated dynamics so that infeasible references produce finite defects.
StateVec propagate_nonlinear_interval(const ReferenceTrajectory& ref,
                                      const VehicleParams& params, ModelVariant variant,
                                      int interval, const StateVec& x_start, int substeps);

// Saturated vehicle model on the normalized arc scale.
ModelFn vehicle_model_fn(const VehicleParams& params, ModelVariant variant, double arc_span);

}  // namespace scvx
