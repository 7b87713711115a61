#ifndef AC2MPC_RL_TRAINER_HPP
#define AC2MPC_RL_TRAINER_HPP

#include "ac2mpc/rl/checkpoint.hpp"
#include "ac2mpc/rl/observation.hpp"

#include <functional>
#include <memory>

namespace ac2mpc::rl {

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  /// The episode ended on its time limit rather than in a terminal state.
  bool truncated = false;
};

/// Episodic environment stepped at the control rate with a scalar action.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  /// Fixed input scaling handed to the policy; ones unless overridden.
  virtual Vector observation_scale() const { return Vector::Ones(observation_size()); }
  virtual Vector reset(std::uint64_t seed) = 0;
  virtual StepResult step(double action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// splitmix64 of (master, stream): independent streams from one master seed.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

struct CurvePoint {
  long env_steps = 0;
  double mean_episode_reward = 0.0;
};

struct TrainOptions {
  std::string controller = "ac";
  long budget_steps = 0;
  int workers = 1;
  /// Snapshots are taken at the first epoch boundary at or past each entry.
  std::vector<long> checkpoint_steps = {2000, 5000, 20000};
  /// Called on the training thread whenever a snapshot is taken.
  std::function<void(const PolicyCheckpoint&)> on_checkpoint;
  std::function<void(const CurvePoint&)> on_epoch;
};

struct TrainResult {
  PolicyCheckpoint final_checkpoint;
  std::vector<PolicyCheckpoint> checkpoints;
  std::vector<CurvePoint> curve;
  std::vector<std::string> faults;
  int retired_workers = 0;
  /// True when every worker was retired before the budget was spent.
  bool aborted = false;
};

/// PPO training loop: parallel rollout collection with a frozen policy, then a
/// serialized update. A worker whose environment throws is retired.
TrainResult train_ppo(const EnvFactory& make_env, const PpoConfig& config, const TrainOptions& options);

/// Step index at which a reward curve first reaches `fraction` of its plateau,
/// the mean of the final `tail_fraction` of points. Returns -1 for an empty curve.
long steps_to_plateau(const std::vector<CurvePoint>& curve, double fraction = 0.9, double tail_fraction = 0.2);

void write_reward_curve_csv(const std::filesystem::path& file, const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> read_reward_curve_csv(const std::filesystem::path& file);

/// 1-D speed-tracking toy: v' = gain * a, observation and reward as for the
/// standalone throttle agent.
class DoubleIntegratorEnv : public Environment {
 public:
  struct Params {
    double v_ref = 4.0;
    double gain = 2.0;
    double dt = 0.1;
    int episode_steps = 100;
    /// Initial speed drawn uniformly from [0, max_initial_speed] per episode.
    double max_initial_speed = 0.0;
  };

  DoubleIntegratorEnv() = default;
  explicit DoubleIntegratorEnv(Params p) : p_(p) {}

  int observation_size() const override { return kAcObservationSize; }
  Vector observation_scale() const override;
  Vector reset(std::uint64_t seed) override;
  StepResult step(double action) override;

  double position() const { return x_; }
  double speed() const { return v_; }

 private:
  Params p_;
  double x_ = 0.0;
  double v_ = 0.0;
  int t_ = 0;
  History history_;
};

}  // namespace ac2mpc::rl

#endif  // AC2MPC_RL_TRAINER_HPP
