#ifndef AC2MPC_ENSEMBLE_COMPENSATOR_HPP
#define AC2MPC_ENSEMBLE_COMPENSATOR_HPP

#include "ac2mpc/mpc/mpc.hpp"
#include "ac2mpc/rl/trainer.hpp"
#include "ac2mpc/terrain/plant.hpp"

#include <string>

namespace ac2mpc::ensemble {

using rl::History;
using rl::kHistoryLength;

inline constexpr int kAc2mpcObservationSize = 2 + 3 * kHistoryLength;
/// Speeds enter the networks divided by this reference magnitude.
inline constexpr double kSpeedScale = 10.0;

struct CompensatorConfig {
  double w21_tracking = 1.0;
  double w22_smoothness = 0.03;
  double w23_low_speed = 1.0;
  double v_threshold = 1.0;
  double spread_normalizer = 1.0;
  rl::RewardWeights ac_reward;  // r1 for the standalone agent
  double steering_p_gain = 0.5;
  rl::PpoConfig ppo;
  mpc::MpcConfig mpc;

  void validate() const;
};

/// [v, v_ref, agent a_{t-1..t-10}, mpc a_{t-1..t-10}, v_err_{t-1..t-10}]
Vector build_observation_ac2(double v, double v_ref, const History& agent, const History& mpc, const History& error);

/// W21 / (1 + |v_err|) - W22 * std(agent) / N - W23 * [a_rl > 0 and v < v_threshold]
double reward_r2(double v_err, const History& agent_history, double a_rl, double v, const CompensatorConfig& config);

enum class ControllerKind { Mpc, Ac, Ac2mpc };

std::string to_string(ControllerKind kind);
ControllerKind parse_controller(const std::string& name);
/// Network input size for a learned controller; 0 for the bare MPC.
int observation_size(ControllerKind kind);
/// Loading a checkpoint into the wrong controller is a validation error.
void check_checkpoint(const rl::PolicyCheckpoint& checkpoint, ControllerKind kind);

/// MPC throttle plus compensation, saturated; MPC steering passes
/// through. A degenerate MPC solve leaves the agent alone in charge.
ControlInput combine_inputs(const ControlInput& u_mpc, double u_rl, bool mpc_degenerate);

/// Heading error to the path tangent plus a bounded cross-track term.
double cross_track_heading_error(const VehicleState& state, const mpc::ReferencePath& path);

/// Standalone agent: throttle from the policy, proportional steering rate.
ControlInput ac_standalone_step(const VehicleState& state, const mpc::ReferencePath& path, double throttle,
                                double p_gain);

struct StepLog {
  VehicleState before;
  VehicleState after;
  double v_ref = 0.0;        // at the position after the step
  double v_err_decision = 0.0;
  ControlInput u_mpc;        // zero for the standalone agent
  double u_rl = 0.0;         // zero for the bare MPC
  ControlInput applied;
  double reward = 0.0;
  bool mpc_degenerate = false;
};

/// One controller driving one plant along one path at the control rate:
/// one MPC solve, one agent action and 33 ZOH plant substeps per step.
class ClosedLoop {
 public:
  ClosedLoop(ControllerKind kind, terrain::Plant plant, mpc::ReferencePath path, CompensatorConfig config);

  void reset(const VehicleState& initial);
  /// Reset to rest at the start of the path, aligned with it.
  void reset();

  ControllerKind kind() const { return kind_; }
  const VehicleState& state() const { return state_; }
  const terrain::Plant& plant() const { return plant_; }
  const mpc::ReferencePath& path() const { return path_; }
  const CompensatorConfig& config() const { return config_; }
  long steps() const { return steps_; }

  const History& agent_history() const { return agent_; }
  const History& mpc_history() const { return mpc_hist_; }
  const History& error_history() const { return error_; }
  const History& applied_history() const { return applied_; }

  double reference_speed() const;
  /// Observation for the agent at the current state; empty for the bare MPC.
  Vector observation() const;
  Vector observation_scale() const;

  StepLog step(double agent_action);

 private:
  ControllerKind kind_;
  terrain::Plant plant_;
  mpc::ReferencePath path_;
  CompensatorConfig config_;
  mpc::MpcController mpc_;
  VehicleState state_;
  History agent_, mpc_hist_, error_, applied_;
  long steps_ = 0;
};

/// Training environment: episodes of fixed length on a ClosedLoop.
class ClosedLoopEnv : public rl::Environment {
 public:
  ClosedLoopEnv(ClosedLoop loop, int episode_steps);

  int observation_size() const override;
  Vector observation_scale() const override { return loop_.observation_scale(); }
  Vector reset(std::uint64_t seed) override;
  rl::StepResult step(double action) override;

  const ClosedLoop& loop() const { return loop_; }

 private:
  ClosedLoop loop_;
  int episode_steps_;
};

}  // namespace ac2mpc::ensemble

#endif  // AC2MPC_ENSEMBLE_COMPENSATOR_HPP
