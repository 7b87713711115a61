#include "ac2mpc/rl/observation.hpp"

namespace ac2mpc::rl {

double History::stddev() const {
  double mean = 0.0;
  for (double v : values_) mean += v;
  mean /= kHistoryLength;
  double ss = 0.0;
  for (double v : values_) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / kHistoryLength);
}

Vector build_observation_ac(double v, double v_ref, const History& actions) {
  Vector obs(kAcObservationSize);
  obs[0] = v;
  obs[1] = v_ref;
  for (int i = 0; i < kHistoryLength; ++i) obs[2 + i] = actions[i];
  return obs;
}

void RewardWeights::validate() const {
  if (!(tracking >= 0.0 && smoothness >= 0.0 && reverse >= 0.0)) {
    throw ValidationError("reward weights must be >= 0");
  }
  if (!(spread_normalizer > 0.0)) throw ValidationError("reward spread_normalizer must be > 0");
}

double reward_r1(double v_err, const History& actions, double v, const RewardWeights& w) {
  double r = w.tracking / (1.0 + std::abs(v_err)) - w.smoothness * actions.stddev() / w.spread_normalizer;
  if (v < 0.0) r -= w.reverse;
  return r;
}

}  // namespace ac2mpc::rl
