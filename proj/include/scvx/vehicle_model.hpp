#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "scvx/errors.hpp"

namespace scvx {

// Arc-length state layout: [e_y, e_psi, psi, v, delta_f, t].
inline constexpr int kStateDim = 6;
inline constexpr int kControlDim = 2;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using ControlVec = Eigen::Matrix<double, kControlDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMat = Eigen::Matrix<double, kStateDim, kControlDim>;

// Time-domain state layout: [X_w, Y_w, psi, v, delta_f].
using TimeStateVec = Eigen::Matrix<double, 5, 1>;

namespace ch {
enum Channel : int { e_y = 0, e_psi = 1, psi = 2, v = 3, delta_f = 4, t = 5 };
}

namespace uch {
enum Channel : int { accel = 0, steer_rate = 1 };
}

// s_dot below this value (m/s) counts as the arc-length singularity.
inline constexpr double kSdotMin = 0.1;
inline constexpr double kDenomMin = 1e-6;

struct VehicleParams {
  double l_r{1.4};  // CoG to rear axle [m]
  double l_f{1.4};  // CoG to front axle [m]

  double wheelbase() const { return l_r + l_f; }
  double slip_ratio() const { return l_r / (l_r + l_f); }
  void validate() const;
};

enum class ModelVariant { RobotCar, SideSlip };

// Road-aligned error state with the elapsed-time channel.
struct ArcState {
  double e_y{0.0};      // lateral error [m]
  double e_psi{0.0};    // heading error [rad]
  double psi{0.0};      // heading [rad]
  double v{0.0};        // speed [m/s]
  double delta_f{0.0};  // front steering angle [rad]
  double t{0.0};        // elapsed time [s]

  StateVec vec() const {
    StateVec x;
    x << e_y, e_psi, psi, v, delta_f, t;
    return x;
  }
  static ArcState from_vec(const StateVec& x) {
    return ArcState{x[0], x[1], x[2], x[3], x[4], x[5]};
  }
};

struct Control {
  double accel{0.0};       // u0 = dV/dt [m/s^2]
  double steer_rate{0.0};  // u1 = d(delta_f)/dt [rad/s]

  ControlVec vec() const { return ControlVec{accel, steer_rate}; }
  static Control from_vec(const ControlVec& u) { return Control{u[0], u[1]}; }
};

// Piecewise-linear curvature lookup kappa(s) over strictly increasing samples.
class CurvatureProfile {
 public:
  CurvatureProfile() = default;
  explicit CurvatureProfile(std::vector<std::pair<double, double>> samples);

  double kappa(double s) const;
  double s_min() const { return samples_.front().first; }
  double s_max() const { return samples_.back().first; }
  const std::vector<std::pair<double, double>>& samples() const { return samples_; }

  static CurvatureProfile straight(double s0, double s1);
  static CurvatureProfile constant_radius(double s0, double s1, double radius);

 private:
  std::vector<std::pair<double, double>> samples_;
};

// beta = arctan(l_r/(l_r+l_f) * tan(delta_f)); odd in delta_f.
double side_slip(double delta_f, const VehicleParams& params);
double side_slip_derivative(double delta_f, const VehicleParams& params);

// s_dot = V cos(e_psi + beta) / (1 - kappa e_y). Throws SingularityError when
// the denominator vanishes or s_dot falls below kSdotMin.
double s_rate(const ArcState& state, double kappa, const VehicleParams& params,
              ModelVariant variant);

// Time-domain derivatives of [X_w, Y_w, psi, v, delta_f].
TimeStateVec time_dynamics(const TimeStateVec& state, const Control& control,
                           const VehicleParams& params, ModelVariant variant);

// Arc-length derivatives d/ds of [e_y, e_psi, psi, v, delta_f, t].
StateVec arc_dynamics(const StateVec& state, const ControlVec& control, double kappa,
                      const VehicleParams& params, ModelVariant variant);

// Exact Jacobians of arc_dynamics with respect to state and control.
void dynamics_jacobians(const StateVec& state, const ControlVec& control, double kappa,
                        const VehicleParams& params, ModelVariant variant, StateMat& dfdx,
                        InputMat& dfdu);

// Saturated variants: instead of raising on the s_dot guard, 1/s_dot is
// clamped to 1/kSdotMin. Reference iterates are allowed to be dynamically
// infeasible, so mid-interval evaluations must stay finite; on any state
// with s_dot above the guard these coincide exactly with the strict forms.
StateVec arc_dynamics_soft(const StateVec& state, const ControlVec& control, double kappa,
                           const VehicleParams& params, ModelVariant variant);
void dynamics_jacobians_soft(const StateVec& state, const ControlVec& control, double kappa,
                             const VehicleParams& params, ModelVariant variant, StateMat& dfdx,
                             InputMat& dfdu);

// Lateral acceleration a_y = V * psi_dot from the kinematic model, plus its
// partials in (V, delta_f); used by the friction-circle linearization.
double lateral_accel(double v, double delta_f, const VehicleParams& params,
                     ModelVariant variant);
void lateral_accel_gradient(double v, double delta_f, const VehicleParams& params,
                            ModelVariant variant, double& d_dv, double& d_ddelta);

}  // namespace scvx
