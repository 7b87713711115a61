#ifndef AC2MPC_MPC_MPC_HPP
#define AC2MPC_MPC_MPC_HPP

#include "ac2mpc/kinematics.hpp"
#include "ac2mpc/mpc/reference_path.hpp"

#include <optional>
#include <vector>

namespace ac2mpc::mpc {

struct MpcConfig {
  int stages_N = 10;
  double horizon_T = 5.0;
  StateVector state_weight_Q = (StateVector() << 1.0, 1.0, 1.0, 0.1, 10.0).finished();
  InputVector input_weight_R = InputVector(200.0, 10.0);
  StateVector terminal_weight_P = 10.0 * state_weight_Q;
  double lateral_accel_bound = 1.5;
  double steering_bound = kSteeringBound;
  double steer_rate_bound = kMaxSteerRate;
  double accel_bound = kMaxThrottle;
  double lateral_penalty_weight = 1e3;
  int sqp_max_iters = 20;
  double sqp_tol = 1e-6;
  bool rti_mode = true;
  /// Forward-difference step for the shooting Jacobians.
  double jacobian_step = 1e-6;

  double stage_dt() const { return horizon_T / stages_N; }
  void validate() const;
};

enum class MpcStatus { Converged, MaxIters, Degenerate };

struct MpcSolution {
  std::vector<StateVector> states;    // x_0 .. x_N
  std::vector<InputVector> controls;  // u_0 .. u_{N-1}
  double objective = 0.0;
  int iterations = 0;
  /// KKT residual of the last QP subproblem.
  double kkt_residual = 0.0;
  /// Infinity norm of the last accepted control step.
  double step_norm = 0.0;
  MpcStatus status = MpcStatus::Converged;

  /// First-stage input, projected onto the actuator box.
  ControlInput first_input(const MpcConfig& config) const;
};

/// Tracking objective of a candidate trajectory: terminal term, stage terms and
/// the quadratic lateral-acceleration penalty on x_1 .. x_N.
double trajectory_objective(const std::vector<StateVector>& states, const std::vector<InputVector>& controls,
                            const References& refs, const MpcConfig& config, const BicycleGeometry& geom);

/// Nonlinear forward simulation of the prediction model.
std::vector<StateVector> rollout(const StateVector& x0, const std::vector<InputVector>& controls,
                                 const MpcConfig& config, const BicycleGeometry& geom);

/// Gauss-Newton model (Hessian, gradient) of the objective as a function of the
/// stacked controls, states eliminated by forward simulation.
struct CondensedModel {
  Matrix hessian;
  Vector gradient;
};
CondensedModel condensed_model(const StateVector& x0, const std::vector<InputVector>& controls,
                               const References& refs, const MpcConfig& config, const BicycleGeometry& geom);

/// Direct multiple shooting SQP with a Gauss-Newton Hessian. Full mode
/// iterates with a step-halving line search; RTI mode performs one iteration
/// from the warm start.
MpcSolution solve(const VehicleState& x0, const References& refs, const MpcConfig& config,
                  const BicycleGeometry& geom, const MpcSolution* warm_start = nullptr);

/// Drop the first stage and duplicate the last one.
MpcSolution shift_warm_start(const MpcSolution& prev);

/// Receding-horizon wrapper that owns the warm start between control steps.
class MpcController {
 public:
  MpcController(MpcConfig config, BicycleGeometry geom);

  /// Regenerate references from `state`, solve and keep the shifted solution.
  const MpcSolution& solve(const VehicleState& state, const ReferencePath& path);

  const MpcConfig& config() const { return config_; }
  const BicycleGeometry& geometry() const { return geom_; }
  const std::optional<MpcSolution>& last_solution() const { return last_; }
  void reset() { last_.reset(); }

 private:
  MpcConfig config_;
  BicycleGeometry geom_;
  std::optional<MpcSolution> last_;
};

}  // namespace ac2mpc::mpc

#endif  // AC2MPC_MPC_MPC_HPP
