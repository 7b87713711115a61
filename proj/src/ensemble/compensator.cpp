#include "ac2mpc/ensemble/compensator.hpp"

#include <algorithm>

namespace ac2mpc::ensemble {

void CompensatorConfig::validate() const {
  if (!(w21_tracking >= 0.0 && w22_smoothness >= 0.0 && w23_low_speed >= 0.0)) {
    throw ValidationError("compensator: reward weights must be >= 0");
  }
  if (!(v_threshold >= 0.0)) throw ValidationError("compensator.v_threshold: must be >= 0");
  if (!(spread_normalizer > 0.0)) throw ValidationError("compensator.spread_normalizer: must be > 0");
  if (!(steering_p_gain >= 0.0)) throw ValidationError("compensator.steering_p_gain: must be >= 0");
  ac_reward.validate();
  ppo.validate();
  mpc.validate();
}

Vector build_observation_ac2(double v, double v_ref, const History& agent, const History& mpc, const History& error) {
  Vector obs(kAc2mpcObservationSize);
  obs[0] = v;
  obs[1] = v_ref;
  for (int i = 0; i < kHistoryLength; ++i) {
    obs[2 + i] = agent[i];
    obs[2 + kHistoryLength + i] = mpc[i];
    obs[2 + 2 * kHistoryLength + i] = error[i];
  }
  return obs;
}

double reward_r2(double v_err, const History& agent_history, double a_rl, double v, const CompensatorConfig& c) {
  double r = c.w21_tracking / (1.0 + std::abs(v_err)) - c.w22_smoothness * agent_history.stddev() / c.spread_normalizer;
  if (a_rl > 0.0 && v < c.v_threshold) r -= c.w23_low_speed;
  return r;
}

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Mpc: return "mpc";
    case ControllerKind::Ac: return "ac";
    case ControllerKind::Ac2mpc: return "ac2mpc";
  }
  return "?";
}

ControllerKind parse_controller(const std::string& name) {
  if (name == "mpc") return ControllerKind::Mpc;
  if (name == "ac") return ControllerKind::Ac;
  if (name == "ac2mpc") return ControllerKind::Ac2mpc;
  throw ValidationError("controller: expected mpc, ac or ac2mpc, got '" + name + "'");
}

int observation_size(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Mpc: return 0;
    case ControllerKind::Ac: return rl::kAcObservationSize;
    case ControllerKind::Ac2mpc: return kAc2mpcObservationSize;
  }
  return 0;
}

void check_checkpoint(const rl::PolicyCheckpoint& checkpoint, ControllerKind kind) {
  if (kind == ControllerKind::Mpc) throw ValidationError("checkpoint: the mpc controller takes no checkpoint");
  const int expected = observation_size(kind);
  if (checkpoint.observation_size() != expected) {
    throw ValidationError("checkpoint: observation size " + std::to_string(checkpoint.observation_size()) +
                          " does not match controller " + to_string(kind) + " (expects " +
                          std::to_string(expected) + ")");
  }
}

ControlInput combine_inputs(const ControlInput& u_mpc, double u_rl, bool mpc_degenerate) {
  if (mpc_degenerate) return ControlInput{u_rl, 0.0}.saturated();
  return ControlInput{u_mpc.throttle_a + u_rl, u_mpc.steer_rate_omega}.saturated();
}

double cross_track_heading_error(const VehicleState& state, const mpc::ReferencePath& path) {
  constexpr double kLookahead = 5.0;  // m
  const mpc::PathProjection proj = project_to_path(path, Eigen::Vector2d(state.s_x, state.s_y));
  return wrap_angle(state.heading_phi - path.heading_at(proj.arc_length)) +
         std::atan(proj.signed_offset / kLookahead);
}

ControlInput ac_standalone_step(const VehicleState& state, const mpc::ReferencePath& path, double throttle,
                                double p_gain) {
  const double omega = -p_gain * cross_track_heading_error(state, path);
  return ControlInput{throttle, omega}.saturated();
}

ClosedLoop::ClosedLoop(ControllerKind kind, terrain::Plant plant, mpc::ReferencePath path, CompensatorConfig config)
    : kind_(kind),
      plant_(std::move(plant)),
      path_(std::move(path)),
      config_(std::move(config)),
      mpc_(config_.mpc, plant_.geometry()) {
  config_.validate();
  reset();
}

void ClosedLoop::reset(const VehicleState& initial) {
  if (!initial.finite()) throw ValidationError("closed loop: non-finite initial state");
  state_ = initial;
  agent_.reset();
  mpc_hist_.reset();
  error_.reset();
  applied_.reset();
  mpc_.reset();
  steps_ = 0;
}

void ClosedLoop::reset() {
  VehicleState s;
  const Eigen::Vector2d p0 = path_.point_at(0.0);
  s.s_x = p0.x();
  s.s_y = p0.y();
  s.heading_phi = path_.heading_at(0.0);
  reset(s);
}

double ClosedLoop::reference_speed() const {
  return path_.speed_at(project_to_path(path_, Eigen::Vector2d(state_.s_x, state_.s_y)).arc_length);
}

Vector ClosedLoop::observation() const {
  switch (kind_) {
    case ControllerKind::Ac: return rl::build_observation_ac(state_.speed_v, reference_speed(), agent_);
    case ControllerKind::Ac2mpc:
      return build_observation_ac2(state_.speed_v, reference_speed(), agent_, mpc_hist_, error_);
    case ControllerKind::Mpc: break;
  }
  return Vector();
}

Vector ClosedLoop::observation_scale() const {
  Vector scale = Vector::Ones(observation_size(kind_));
  if (scale.size() == 0) return scale;
  scale.head(2).setConstant(1.0 / kSpeedScale);
  if (kind_ == ControllerKind::Ac2mpc) scale.tail(kHistoryLength).setConstant(1.0 / kSpeedScale);
  return scale;
}

StepLog ClosedLoop::step(double agent_action) {
  StepLog log;
  log.before = state_;
  const double v_ref_now = reference_speed();
  log.v_err_decision = v_ref_now - state_.speed_v;

  if (kind_ != ControllerKind::Ac) {
    const mpc::MpcSolution& sol = mpc_.solve(state_, path_);
    log.u_mpc = sol.first_input(config_.mpc);
    log.mpc_degenerate = sol.status == mpc::MpcStatus::Degenerate;
  }
  if (kind_ != ControllerKind::Mpc) {
    if (!std::isfinite(agent_action)) throw SolverFault("closed loop: non-finite agent action");
    log.u_rl = std::clamp(agent_action, -rl::kActionBound, rl::kActionBound);
  }

  switch (kind_) {
    case ControllerKind::Mpc: log.applied = log.u_mpc; break;
    case ControllerKind::Ac:
      log.applied = ac_standalone_step(state_, path_, log.u_rl, config_.steering_p_gain);
      break;
    case ControllerKind::Ac2mpc: log.applied = combine_inputs(log.u_mpc, log.u_rl, log.mpc_degenerate); break;
  }

  state_ = plant_.run_with_zoh(state_, log.applied);
  ++steps_;
  agent_.push(log.u_rl);
  mpc_hist_.push(log.u_mpc.throttle_a);
  error_.push(log.v_err_decision);
  applied_.push(log.applied.throttle_a);

  log.after = state_;
  log.v_ref = reference_speed();
  const double v_err = log.v_ref - state_.speed_v;
  switch (kind_) {
    case ControllerKind::Mpc: log.reward = rl::reward_r1(v_err, applied_, state_.speed_v, config_.ac_reward); break;
    case ControllerKind::Ac: log.reward = rl::reward_r1(v_err, agent_, state_.speed_v, config_.ac_reward); break;
    case ControllerKind::Ac2mpc:
      log.reward = reward_r2(v_err, agent_, log.u_rl, log.before.speed_v, config_);
      break;
  }
  return log;
}

ClosedLoopEnv::ClosedLoopEnv(ClosedLoop loop, int episode_steps) : loop_(std::move(loop)), episode_steps_(episode_steps) {
  if (loop_.kind() == ControllerKind::Mpc) throw ValidationError("training environment needs a learned controller");
  if (episode_steps_ < 1) throw ValidationError("episode_steps: must be >= 1");
}

int ClosedLoopEnv::observation_size() const { return ensemble::observation_size(loop_.kind()); }

Vector ClosedLoopEnv::reset(std::uint64_t) {
  loop_.reset();
  return loop_.observation();
}

rl::StepResult ClosedLoopEnv::step(double action) {
  const StepLog log = loop_.step(action);
  rl::StepResult r;
  r.reward = log.reward;
  r.done = loop_.steps() >= episode_steps_;
  r.truncated = r.done;
  r.observation = loop_.observation();
  return r;
}

}  // namespace ac2mpc::ensemble
