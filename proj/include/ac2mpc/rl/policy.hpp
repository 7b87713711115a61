#ifndef AC2MPC_RL_POLICY_HPP
#define AC2MPC_RL_POLICY_HPP

#include "ac2mpc/rl/mlp.hpp"
#include "ac2mpc/types.hpp"

#include <random>

namespace ac2mpc::rl {

inline const std::vector<int> kHiddenLayers = {8, 32, 16, 8};
inline constexpr double kInitialLogStd = -0.5;
inline constexpr double kActionBound = 1.0;

std::vector<int> layer_sizes(int input, int output);

struct PolicySample {
  double action = 0.0;    // clipped to the action bounds
  double raw = 0.0;       // pre-clip Gaussian sample
  double log_prob = 0.0;  // density of `raw`
};

/// Diagonal Gaussian over a single throttle action with a state-dependent mean
/// and a state-independent learnable log standard deviation.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int observation_size, double log_std = kInitialLogStd);

  /// Fixed per-feature multipliers applied to raw observations before the
  /// network (both actor and critic). Defaults to ones.
  const Vector& input_scale() const { return input_scale_; }
  void set_input_scale(const Vector& scale);
  Vector scaled(const Vector& obs) const;

  Mlp<double>& mean_net() { return mean_; }
  const Mlp<double>& mean_net() const { return mean_; }
  double log_std() const { return log_std_; }
  void set_log_std(double value) { log_std_ = value; }
  int observation_size() const { return mean_.input_size(); }

  double mean(const Vector& obs) const;
  double log_prob(const Vector& obs, double raw_action) const;
  double entropy() const;

  /// Deterministic action: the clipped mean.
  double act(const Vector& obs) const;

 private:
  Mlp<double> mean_;
  double log_std_ = kInitialLogStd;
  Vector input_scale_;
};

/// Gaussian log-density of x under N(mean, exp(log_std)^2).
double gaussian_log_prob(double x, double mean, double log_std);

/// Sample, clip, and score the pre-clip sample. Non-finite network output is a fault.
PolicySample policy_sample(const GaussianPolicy& policy, const Vector& obs, std::mt19937_64& rng);

/// Actor plus value network sharing one flat parameter layout for the optimizer:
/// [actor weights, log_std, critic weights].
struct ActorCritic {
  GaussianPolicy actor;
  Mlp<double> critic;

  ActorCritic() = default;
  explicit ActorCritic(int observation_size);

  template <typename Rng>
  void initialize(Rng& rng) {
    // A small output layer keeps the initial mean action near zero.
    actor.mean_net().initialize(rng, 0.01);
    actor.set_log_std(kInitialLogStd);
    critic.initialize(rng, 1.0);
  }

  int observation_size() const { return actor.observation_size(); }
  int parameter_count() const;
  double value(const Vector& obs) const { return critic.forward_one(actor.scaled(obs))[0]; }

  Vector flat() const;
  void set_flat(const Vector& theta);
};

}  // namespace ac2mpc::rl

#endif  // AC2MPC_RL_POLICY_HPP
