#ifndef AC2MPC_RL_OBSERVATION_HPP
#define AC2MPC_RL_OBSERVATION_HPP

#include "ac2mpc/types.hpp"

#include <array>

namespace ac2mpc::rl {

inline constexpr int kHistoryLength = 10;
inline constexpr int kAcObservationSize = 2 + kHistoryLength;

/// Fixed-length history, most recent entry first, zero-filled at construction.
class History {
 public:
  void push(double value) {
    for (int i = kHistoryLength - 1; i > 0; --i) values_[i] = values_[i - 1];
    values_[0] = value;
    ++count_;
  }
  void reset() { *this = History{}; }

  double operator[](int i) const { return values_[i]; }
  const std::array<double, kHistoryLength>& values() const { return values_; }
  long pushes() const { return count_; }

  /// Population standard deviation of the stored entries.
  double stddev() const;

 private:
  std::array<double, kHistoryLength> values_{};
  long count_ = 0;
};

/// [v, v_ref, a_{t-1} .. a_{t-10}]
Vector build_observation_ac(double v, double v_ref, const History& actions);

struct RewardWeights {
  double tracking = 1.0;    // W11
  double smoothness = 0.1;  // W12
  double reverse = 1.0;     // W13
  double spread_normalizer = 1.0;

  void validate() const;
};

/// W11 / (1 + |v_err|) - W12 * std(actions) / N - [v < 0] * W13
double reward_r1(double v_err, const History& actions, double v, const RewardWeights& w = {});

}  // namespace ac2mpc::rl

#endif  // AC2MPC_RL_OBSERVATION_HPP
