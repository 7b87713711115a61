#ifndef AC2MPC_RL_PPO_HPP
#define AC2MPC_RL_PPO_HPP

#include "ac2mpc/rl/policy.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace ac2mpc::rl {

struct PpoConfig {
  double learning_rate = 0.01;
  double clip_eps = 0.2;
  int batch_size = 50;
  int steps_per_epoch = 300;
  double discount_gamma = 0.99;
  double gae_lambda = 0.95;
  int update_epochs = 10;
  double kl_stop_threshold = 0.03;
  double value_coeff = 0.5;
  double entropy_coeff = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const PpoConfig&) const = default;
};

/// Transitions from one or more rollout segments. Each segment ends either on
/// a terminal step or with a bootstrap value for the state after its last step.
struct RolloutBuffer {
  std::vector<Vector> observations;
  std::vector<double> actions;  // pre-clip samples
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> log_probs;
  std::vector<bool> dones;
  std::vector<std::size_t> segment_ends;
  std::vector<double> bootstrap_values;

  Vector advantages;
  Vector returns;

  std::size_t size() const { return rewards.size(); }
  void add(const Vector& obs, double raw_action, double reward, double value, double log_prob, bool done);
  void end_segment(double bootstrap_value);
  /// Concatenate another buffer's segments after this one's.
  void append(const RolloutBuffer& other);
  void clear();
};

struct GaeResult {
  Vector advantages;
  Vector returns;
};

/// Generalized advantage estimation, segment by segment. A trailing unclosed
/// segment is bootstrapped with zero.
GaeResult gae_advantages(const RolloutBuffer& buffer, double gamma, double lambda);

/// Zero mean, unit population standard deviation. A constant vector maps to zeros.
Vector normalize_advantages(const Vector& advantages);

class Adam {
 public:
  Adam() = default;
  Adam(int size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// One descent step on `theta` along `grad`.
  void step(Vector& theta, const Vector& grad);
  int steps() const { return t_; }

 private:
  double lr_ = 0.0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  Vector m_, v_;
  int t_ = 0;
};

/// min(r A, clip(r, 1 - eps, 1 + eps) A).
double clipped_objective(double ratio, double advantage, double eps);

struct Minibatch {
  Matrix observations;  // obs_size x B
  Vector actions;
  Vector old_log_probs;
  Vector advantages;
  Vector returns;
};

struct LossEvaluation {
  double loss = 0.0;  // quantity minimized
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  Vector gradient;  // d loss / d theta in the ActorCritic flat layout
};

/// loss = -mean(clipped surrogate) + value_coeff * mean((V - R)^2) - entropy_coeff * entropy
LossEvaluation ppo_loss(const ActorCritic& model, const Minibatch& batch, const PpoConfig& config,
                        bool with_gradient = true);

struct UpdateDiagnostics {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int minibatch_steps = 0;
  bool early_stopped = false;
  bool fault = false;
};

/// Clipped-surrogate update over shuffled minibatches. Expects advantages and
/// returns already filled in the buffer. On a non-finite loss the parameters
/// are restored to their values on entry and `fault` is set.
UpdateDiagnostics ppo_update(ActorCritic& model, Adam& optimizer, const RolloutBuffer& buffer,
                             const PpoConfig& config, std::mt19937_64& rng);

}  // namespace ac2mpc::rl

#endif  // AC2MPC_RL_PPO_HPP
