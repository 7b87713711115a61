#ifndef AC2MPC_HARNESS_EPISODE_HPP
#define AC2MPC_HARNESS_EPISODE_HPP

#include "ac2mpc/harness/scenario.hpp"
#include "ac2mpc/rl/checkpoint.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ac2mpc::harness {

inline constexpr double kMetricDt = 0.1;  // s, control period used by the metrics

struct EpisodeRow {
  double time = 0.0;
  double s_x = 0.0;
  double s_y = 0.0;
  double v = 0.0;
  double v_ref = 0.0;
  double u_mpc = 0.0;      // MPC throttle
  double u_rl = 0.0;       // agent throttle
  double u_applied = 0.0;  // throttle sent to the plant
  double reward = 0.0;
  double omega_mpc = 0.0;
  double omega_applied = 0.0;

  bool operator==(const EpisodeRow&) const = default;
};

/// Column order of the time-series CSV.
const std::vector<std::string>& episode_columns();

enum class FaultKind { None, Plant, Solver, Validation };

struct EpisodeRecord {
  std::string scenario;
  std::string controller;
  std::vector<EpisodeRow> rows;
  FaultKind fault = FaultKind::None;
  std::string fault_message;
  int degenerate_steps = 0;

  bool truncated() const { return fault != FaultKind::None; }
};

struct MetricsReport {
  double delta_v_rms = 0.0;  // m/s
  double rms_jerk = 0.0;     // m/s^3
};

/// One deterministic episode: the learned controllers act with the policy mean.
EpisodeRecord run_episode(const ScenarioSpec& spec, ensemble::ControllerKind kind,
                          const rl::PolicyCheckpoint* checkpoint = nullptr,
                          const ensemble::CompensatorConfig& config = {});
/// Resolves the controller and checkpoint named inside the spec.
EpisodeRecord run_episode(const ScenarioSpec& spec);

MetricsReport compute_metrics(const std::vector<double>& v, const std::vector<double>& v_ref, double dt = kMetricDt);
MetricsReport compute_metrics(const EpisodeRecord& record);

/// Training environment for a scenario: ClosedLoopEnv over its plant and path.
rl::EnvFactory scenario_env_factory(const ScenarioSpec& spec, ensemble::ControllerKind kind,
                                    const ensemble::CompensatorConfig& config = {});

std::string to_string(FaultKind kind);

void write_episode_csv(const EpisodeRecord& record, const std::filesystem::path& file);
std::vector<EpisodeRow> read_episode_csv(const std::filesystem::path& file);

/// Shortest text that parses back to the same double.
std::string format_double(double x);

}  // namespace ac2mpc::harness

#endif  // AC2MPC_HARNESS_EPISODE_HPP
