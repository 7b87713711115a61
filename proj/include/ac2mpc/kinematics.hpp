#ifndef AC2MPC_KINEMATICS_HPP
#define AC2MPC_KINEMATICS_HPP

#include "ac2mpc/types.hpp"

#include <cmath>

namespace ac2mpc {

struct BicycleGeometry {
  double wheelbase_L = 2.75;
  double cg_to_rear_Lr = 1.75;
  double max_accel_scale = 5.0;
};

/// Body slip angle beta = atan((L_r / L) tan theta).
template <typename Scalar>
Scalar slip_angle(Scalar theta, const BicycleGeometry& geom) {
  using std::atan;
  using std::tan;
  return atan(Scalar(geom.cg_to_rear_Lr / geom.wheelbase_L) * tan(theta));
}

/// Kinematic bicycle rates with an externally supplied longitudinal acceleration.
template <typename Derived>
StateVec<typename Derived::Scalar> bicycle_rates(const Eigen::MatrixBase<Derived>& x,
                                                 typename Derived::Scalar steer_rate,
                                                 typename Derived::Scalar accel,
                                                 const BicycleGeometry& geom) {
  using Scalar = typename Derived::Scalar;
  using std::cos;
  using std::sin;
  using std::tan;
  const Scalar beta = slip_angle(x[kTheta], geom);
  const Scalar v = x[kV];
  StateVec<Scalar> dx;
  dx[kSx] = v * cos(x[kPhi] + beta);
  dx[kSy] = v * sin(x[kPhi] + beta);
  dx[kPhi] = v / Scalar(geom.wheelbase_L) * tan(beta);
  dx[kTheta] = steer_rate;
  dx[kV] = accel;
  return dx;
}

/// Prediction model: v' = max_accel_scale * throttle.
template <typename DerivedX, typename DerivedU>
StateVec<typename DerivedX::Scalar> dynamics_rhs(const Eigen::MatrixBase<DerivedX>& x,
                                                 const Eigen::MatrixBase<DerivedU>& u,
                                                 const BicycleGeometry& geom) {
  using Scalar = typename DerivedX::Scalar;
  return bicycle_rates(x, Scalar(u[kSteerRate]), Scalar(geom.max_accel_scale) * Scalar(u[kThrottle]), geom);
}

/// One classical fourth-order Runge-Kutta step of a time-varying rhs f(t, x).
template <typename Scalar, typename Rhs>
StateVec<Scalar> rk4_step(Rhs&& f, const StateVec<Scalar>& x, Scalar t, Scalar dt) {
  const StateVec<Scalar> k1 = f(t, x);
  const StateVec<Scalar> k2 = f(t + dt / 2, StateVec<Scalar>(x + dt / 2 * k1));
  const StateVec<Scalar> k3 = f(t + dt / 2, StateVec<Scalar>(x + dt / 2 * k2));
  const StateVec<Scalar> k4 = f(t + dt, StateVec<Scalar>(x + dt * k3));
  return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// Discrete prediction map x+ = F(x, u) over one shooting interval.
template <typename Scalar>
StateVec<Scalar> integrate(const StateVec<Scalar>& x, const InputVec<Scalar>& u, Scalar dt,
                           const BicycleGeometry& geom) {
  return rk4_step<Scalar>([&](Scalar, const StateVec<Scalar>& s) { return dynamics_rhs(s, u, geom); }, x,
                          Scalar(0), dt);
}

/// a_l = v^2 tan(theta) / L.
template <typename Derived>
typename Derived::Scalar lateral_accel(const Eigen::MatrixBase<Derived>& x, const BicycleGeometry& geom) {
  using std::tan;
  return x[kV] * x[kV] * tan(x[kTheta]) / typename Derived::Scalar(geom.wheelbase_L);
}

}  // namespace ac2mpc

#endif  // AC2MPC_KINEMATICS_HPP
