#ifndef AC2MPC_RL_CHECKPOINT_HPP
#define AC2MPC_RL_CHECKPOINT_HPP

#include "ac2mpc/rl/ppo.hpp"

#include <filesystem>
#include <string>

namespace ac2mpc::rl {

/// Persistent actor/critic snapshot. Stored as JSON; doubles are written in
/// shortest round-trip form so a reload reproduces forward passes bitwise.
struct PolicyCheckpoint {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string controller;  // "ac" or "ac2mpc"
  ActorCritic model;
  PpoConfig config;
  long env_steps = 0;

  int observation_size() const { return model.observation_size(); }

  std::string to_string() const;
  static PolicyCheckpoint from_string(const std::string& text);

  void save(const std::filesystem::path& file) const;
  static PolicyCheckpoint load(const std::filesystem::path& file);
};

}  // namespace ac2mpc::rl

#endif  // AC2MPC_RL_CHECKPOINT_HPP
