#ifndef AC2MPC_TYPES_HPP
#define AC2MPC_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ac2mpc {

template <typename Scalar>
using StateVec = Eigen::Matrix<Scalar, 5, 1>;
template <typename Scalar>
using InputVec = Eigen::Matrix<Scalar, 2, 1>;

using StateVector = StateVec<double>;
using InputVector = InputVec<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Ordering of the planar bicycle state: (s_x, s_y, phi, theta, v).
enum StateIndex : int { kSx = 0, kSy = 1, kPhi = 2, kTheta = 3, kV = 4 };
enum InputIndex : int { kThrottle = 0, kSteerRate = 1 };

inline constexpr int kStateSize = 5;
inline constexpr int kInputSize = 2;

inline constexpr double kGravity = 9.81;
inline constexpr double kMaxThrottle = 1.0;
inline constexpr double kMaxSteerRate = 0.05;
inline constexpr double kSteeringBound = 0.57;

struct VehicleState {
  double s_x = 0.0;
  double s_y = 0.0;
  double heading_phi = 0.0;
  double steering_theta = 0.0;
  double speed_v = 0.0;
  double sim_time = 0.0;

  StateVector vector() const {
    StateVector x;
    x << s_x, s_y, heading_phi, steering_theta, speed_v;
    return x;
  }

  static VehicleState from_vector(const StateVector& x, double t) {
    return {x[kSx], x[kSy], x[kPhi], x[kTheta], x[kV], t};
  }

  bool finite() const {
    return std::isfinite(s_x) && std::isfinite(s_y) && std::isfinite(heading_phi) &&
           std::isfinite(steering_theta) && std::isfinite(speed_v) && std::isfinite(sim_time);
  }

  bool operator==(const VehicleState&) const = default;
};

/// Normalized throttle (1 == max_accel_scale m/s^2) and steering rate in rad/s.
struct ControlInput {
  double throttle_a = 0.0;
  double steer_rate_omega = 0.0;

  InputVector vector() const { return InputVector(throttle_a, steer_rate_omega); }

  /// Clamp onto the actuator box |a| <= 1, |omega| <= 0.05.
  ControlInput saturated() const;

  bool admissible() const {
    return std::abs(throttle_a) <= kMaxThrottle && std::abs(steer_rate_omega) <= kMaxSteerRate;
  }

  bool operator==(const ControlInput&) const = default;
};

inline ControlInput ControlInput::saturated() const {
  auto clamp = [](double x, double b) { return std::isnan(x) ? x : std::min(b, std::max(-b, x)); };
  return {clamp(throttle_a, kMaxThrottle), clamp(steer_rate_omega, kMaxSteerRate)};
}

/// Wrap an angle onto (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * M_PI;
  a = std::fmod(a + M_PI, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - M_PI;
}

// Error categories; the CLI maps each to its own exit code.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PlantFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ac2mpc

#endif  // AC2MPC_TYPES_HPP
