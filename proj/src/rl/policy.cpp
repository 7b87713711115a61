#include "ac2mpc/rl/policy.hpp"

#include <algorithm>

namespace ac2mpc::rl {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

std::vector<int> layer_sizes(int input, int output) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), kHiddenLayers.begin(), kHiddenLayers.end());
  sizes.push_back(output);
  return sizes;
}

double gaussian_log_prob(double x, double mean, double log_std) {
  const double z = (x - mean) * std::exp(-log_std);
  return -0.5 * z * z - log_std - kHalfLog2Pi;
}

GaussianPolicy::GaussianPolicy(int observation_size, double log_std)
    : mean_(layer_sizes(observation_size, 1)), log_std_(log_std), input_scale_(Vector::Ones(observation_size)) {}

void GaussianPolicy::set_input_scale(const Vector& scale) {
  if (scale.size() != observation_size() || !scale.allFinite()) {
    throw ValidationError("policy.input_scale: expected " + std::to_string(observation_size()) + " finite values");
  }
  input_scale_ = scale;
}

Vector GaussianPolicy::scaled(const Vector& obs) const {
  if (obs.size() != observation_size()) {
    throw ValidationError("policy: observation has size " + std::to_string(obs.size()) + ", network expects " +
                          std::to_string(observation_size()));
  }
  return obs.cwiseProduct(input_scale_);
}

double GaussianPolicy::mean(const Vector& obs) const { return mean_.forward_one(scaled(obs))[0]; }

double GaussianPolicy::log_prob(const Vector& obs, double raw_action) const {
  return gaussian_log_prob(raw_action, mean(obs), log_std_);
}

double GaussianPolicy::entropy() const { return log_std_ + 0.5 + kHalfLog2Pi; }

double GaussianPolicy::act(const Vector& obs) const {
  const double mu = mean(obs);
  if (!std::isfinite(mu)) throw SolverFault("policy: non-finite network output");
  return std::clamp(mu, -kActionBound, kActionBound);
}

PolicySample policy_sample(const GaussianPolicy& policy, const Vector& obs, std::mt19937_64& rng) {
  const double mu = policy.mean(obs);
  if (!std::isfinite(mu) || !std::isfinite(policy.log_std())) {
    throw SolverFault("policy: non-finite network output");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  PolicySample s;
  s.raw = mu + std::exp(policy.log_std()) * normal(rng);
  s.action = std::clamp(s.raw, -kActionBound, kActionBound);
  s.log_prob = gaussian_log_prob(s.raw, mu, policy.log_std());
  return s;
}

ActorCritic::ActorCritic(int observation_size)
    : actor(observation_size), critic(layer_sizes(observation_size, 1)) {}

int ActorCritic::parameter_count() const {
  return actor.mean_net().parameter_count() + 1 + critic.parameter_count();
}

Vector ActorCritic::flat() const {
  const int na = actor.mean_net().parameter_count();
  Vector theta(parameter_count());
  theta.head(na) = actor.mean_net().parameters();
  theta[na] = actor.log_std();
  theta.tail(critic.parameter_count()) = critic.parameters();
  return theta;
}

void ActorCritic::set_flat(const Vector& theta) {
  const int na = actor.mean_net().parameter_count();
  if (theta.size() != parameter_count()) throw std::invalid_argument("ActorCritic::set_flat: size mismatch");
  actor.mean_net().parameters() = theta.head(na);
  actor.set_log_std(theta[na]);
  critic.parameters() = theta.tail(critic.parameter_count());
}

}  // namespace ac2mpc::rl
