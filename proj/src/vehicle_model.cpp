#include "scvx/vehicle_model.hpp"

#include <fmt/core.h>

#include <cmath>

namespace scvx {

void VehicleParams::validate() const {
  if (!(l_r > 0.0) || !(l_f > 0.0))
    throw ValidationError(fmt::format("vehicle axle distances must be positive (l_r={}, l_f={})", l_r, l_f));
}

CurvatureProfile::CurvatureProfile(std::vector<std::pair<double, double>> samples)
    : samples_(std::move(samples)) {
  if (samples_.size() < 2) throw ValidationError("curvature profile needs at least two samples");
  for (size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].first > samples_[i - 1].first))
      throw ValidationError("curvature sample arc-lengths must be strictly increasing");
  }
}

double CurvatureProfile::kappa(double s) const {
  const double lo = samples_.front().first;
  const double hi = samples_.back().first;
  const double tol = 1e-9 * std::max(1.0, hi - lo);
  if (s < lo - tol || s > hi + tol)
    throw ValidationError(fmt::format("curvature query s={} outside profile domain [{}, {}]", s, lo, hi));
  s = std::clamp(s, lo, hi);
  // linear scan; profiles are short and queries are mostly sequential
  size_t i = 1;
  while (i + 1 < samples_.size() && samples_[i].first < s) ++i;
  const auto& [s0, k0] = samples_[i - 1];
  const auto& [s1, k1] = samples_[i];
  const double lam = (s - s0) / (s1 - s0);
  return (1.0 - lam) * k0 + lam * k1;
}

CurvatureProfile CurvatureProfile::straight(double s0, double s1) {
  return CurvatureProfile({{s0, 0.0}, {s1, 0.0}});
}

CurvatureProfile CurvatureProfile::constant_radius(double s0, double s1, double radius) {
  if (radius == 0.0) throw ValidationError("constant-radius profile needs a nonzero radius");
  return CurvatureProfile({{s0, 1.0 / radius}, {s1, 1.0 / radius}});
}

double side_slip(double delta_f, const VehicleParams& params) {
  if (!(std::abs(delta_f) < M_PI / 2.0))
    throw std::domain_error(fmt::format("side_slip requires |delta_f| < pi/2, got {}", delta_f));
  return std::atan(params.slip_ratio() * std::tan(delta_f));
}

double side_slip_derivative(double delta_f, const VehicleParams& params) {
  if (!(std::abs(delta_f) < M_PI / 2.0))
    throw std::domain_error(fmt::format("side_slip requires |delta_f| < pi/2, got {}", delta_f));
  const double ks = params.slip_ratio();
  const double tn = std::tan(delta_f);
  const double sec2 = 1.0 + tn * tn;
  return ks * sec2 / (1.0 + ks * ks * tn * tn);
}

namespace {

enum class Guard { Strict, Saturate };

struct ModelTerms {
  double beta;      // side-slip angle (0 for RobotCar)
  double beta_d;    // d(beta)/d(delta_f)
  double yaw_gain;  // T: tan(delta_f) or sin(beta); psi_dot = V/l_r * T
  double yaw_gain_d;
};

ModelTerms model_terms(double delta_f, const VehicleParams& params, ModelVariant variant) {
  ModelTerms m;
  if (variant == ModelVariant::SideSlip) {
    m.beta = side_slip(delta_f, params);
    m.beta_d = side_slip_derivative(delta_f, params);
    m.yaw_gain = std::sin(m.beta);
    m.yaw_gain_d = std::cos(m.beta) * m.beta_d;
  } else {
    m.beta = 0.0;
    m.beta_d = 0.0;
    const double tn = std::tan(delta_f);
    m.yaw_gain = tn;
    m.yaw_gain_d = 1.0 + tn * tn;
  }
  return m;
}

struct EvalCore {
  ModelTerms m;
  double denom;     // 1 - kappa e_y (sign-preserving clamp in Saturate mode)
  double ct, st;
  double inv_sdot;  // 1/s_dot, saturated at 1/kSdotMin in Saturate mode
  bool clamped;
};

EvalCore eval_core(const StateVec& x, double kappa, const VehicleParams& params,
                   ModelVariant variant, Guard guard) {
  EvalCore c;
  c.m = model_terms(x[ch::delta_f], params, variant);
  double denom = 1.0 - kappa * x[ch::e_y];
  if (std::abs(denom) < kDenomMin) {
    if (guard == Guard::Strict)
      throw SingularityError(
          fmt::format("1 - kappa*e_y = {} is singular (kappa={}, e_y={})", denom, kappa, x[ch::e_y]));
    denom = std::copysign(kDenomMin, denom == 0.0 ? 1.0 : denom);
  }
  c.denom = denom;
  const double theta = x[ch::e_psi] + c.m.beta;
  c.ct = std::cos(theta);
  c.st = std::sin(theta);
  const double sdot = x[ch::v] * c.ct / denom;
  if (sdot > kSdotMin) {
    c.inv_sdot = denom / (x[ch::v] * c.ct);
    c.clamped = false;
  } else if (guard == Guard::Strict) {
    throw SingularityError(fmt::format("s_dot = {} below the {} m/s guard", sdot, kSdotMin));
  } else {
    c.inv_sdot = 1.0 / kSdotMin;
    c.clamped = true;
  }
  return c;
}

StateVec dynamics_from_core(const EvalCore& c, const StateVec& x, const ControlVec& u,
                            double kappa, const VehicleParams& params) {
  StateVec dx;
  dx[ch::e_y] = c.denom * c.st / c.ct;
  dx[ch::psi] = c.denom * c.m.yaw_gain / (params.l_r * c.ct);
  dx[ch::e_psi] = dx[ch::psi] - kappa;
  dx[ch::v] = u[uch::accel] * c.inv_sdot;
  dx[ch::delta_f] = u[uch::steer_rate] * c.inv_sdot;
  dx[ch::t] = c.inv_sdot;
  (void)x;
  return dx;
}

void jacobians_from_core(const EvalCore& c, const StateVec& x, const ControlVec& u, double kappa,
                         const VehicleParams& params, StateMat& dfdx, InputMat& dfdu) {
  const double v = x[ch::v];
  const double ct = c.ct;
  const double st = c.st;
  const double sec2 = 1.0 / (ct * ct);
  const double lr = params.l_r;

  dfdx.setZero();
  dfdu.setZero();

  // e_y' = denom * tan(theta)
  dfdx(ch::e_y, ch::e_y) = -kappa * st / ct;
  dfdx(ch::e_y, ch::e_psi) = c.denom * sec2;
  dfdx(ch::e_y, ch::delta_f) = c.denom * sec2 * c.m.beta_d;

  // psi' = denom * T / (l_r cos(theta))
  dfdx(ch::psi, ch::e_y) = -kappa * c.m.yaw_gain / (lr * ct);
  dfdx(ch::psi, ch::e_psi) = c.denom * c.m.yaw_gain * st / (lr * ct * ct);
  dfdx(ch::psi, ch::delta_f) =
      c.denom * (c.m.yaw_gain_d * ct + c.m.yaw_gain * st * c.m.beta_d) / (lr * ct * ct);

  // e_psi' = psi' - kappa: same partials as psi'
  dfdx.row(ch::e_psi) = dfdx.row(ch::psi);

  // v' = u0/s_dot, delta_f' = u1/s_dot, t' = 1/s_dot; in the saturated
  // regime 1/s_dot is constant, so these rows lose their state partials
  Eigen::Matrix<double, 1, kStateDim> dg = Eigen::Matrix<double, 1, kStateDim>::Zero();
  if (!c.clamped) {
    dg(ch::e_y) = -kappa / (v * ct);
    dg(ch::e_psi) = c.denom * st / (v * ct * ct);
    dg(ch::v) = -c.denom / (v * v * ct);
    dg(ch::delta_f) = dg(ch::e_psi) * c.m.beta_d;
  }
  dfdx.row(ch::v) = u[uch::accel] * dg;
  dfdx.row(ch::delta_f) = u[uch::steer_rate] * dg;
  dfdx.row(ch::t) = dg;

  dfdu(ch::v, uch::accel) = c.inv_sdot;
  dfdu(ch::delta_f, uch::steer_rate) = c.inv_sdot;
}

}  // namespace

double s_rate(const ArcState& state, double kappa, const VehicleParams& params,
              ModelVariant variant) {
  const EvalCore c = eval_core(state.vec(), kappa, params, variant, Guard::Strict);
  return 1.0 / c.inv_sdot;
}

TimeStateVec time_dynamics(const TimeStateVec& state, const Control& control,
                           const VehicleParams& params, ModelVariant variant) {
  const double psi = state[2];
  const double v = state[3];
  const double delta_f = state[4];
  const ModelTerms m = model_terms(delta_f, params, variant);
  TimeStateVec dx;
  dx[0] = v * std::cos(psi + m.beta);
  dx[1] = v * std::sin(psi + m.beta);
  dx[2] = v / params.l_r * m.yaw_gain;
  dx[3] = control.accel;
  dx[4] = control.steer_rate;
  return dx;
}

StateVec arc_dynamics(const StateVec& state, const ControlVec& control, double kappa,
                      const VehicleParams& params, ModelVariant variant) {
  const EvalCore c = eval_core(state, kappa, params, variant, Guard::Strict);
  return dynamics_from_core(c, state, control, kappa, params);
}

StateVec arc_dynamics_soft(const StateVec& state, const ControlVec& control, double kappa,
                           const VehicleParams& params, ModelVariant variant) {
  const EvalCore c = eval_core(state, kappa, params, variant, Guard::Saturate);
  return dynamics_from_core(c, state, control, kappa, params);
}

void dynamics_jacobians(const StateVec& state, const ControlVec& control, double kappa,
                        const VehicleParams& params, ModelVariant variant, StateMat& dfdx,
                        InputMat& dfdu) {
  const EvalCore c = eval_core(state, kappa, params, variant, Guard::Strict);
  jacobians_from_core(c, state, control, kappa, params, dfdx, dfdu);
}

void dynamics_jacobians_soft(const StateVec& state, const ControlVec& control, double kappa,
                             const VehicleParams& params, ModelVariant variant, StateMat& dfdx,
                             InputMat& dfdu) {
  const EvalCore c = eval_core(state, kappa, params, variant, Guard::Saturate);
  jacobians_from_core(c, state, control, kappa, params, dfdx, dfdu);
}

double lateral_accel(double v, double delta_f, const VehicleParams& params,
                     ModelVariant variant) {
  const ModelTerms m = model_terms(delta_f, params, variant);
  return v * v / params.l_r * m.yaw_gain;
}

void lateral_accel_gradient(double v, double delta_f, const VehicleParams& params,
                            ModelVariant variant, double& d_dv, double& d_ddelta) {
  const ModelTerms m = model_terms(delta_f, params, variant);
  d_dv = 2.0 * v / params.l_r * m.yaw_gain;
  d_ddelta = v * v / params.l_r * m.yaw_gain_d;
}

}  // namespace scvx
