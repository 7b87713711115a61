#ifndef AC2MPC_HARNESS_COMMANDS_HPP
#define AC2MPC_HARNESS_COMMANDS_HPP

#include "ac2mpc/harness/episode.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ac2mpc::harness {

struct TrainRequest {
  ensemble::ControllerKind kind = ensemble::ControllerKind::Ac2mpc;
  ScenarioSpec scenario;
  long budget = 5000;
  int workers = 1;
  std::uint64_t seed = 0;
  std::vector<long> checkpoint_steps = {2000, 5000, 20000};
  ensemble::CompensatorConfig config;
};

/// Trains and writes checkpoint_<steps>.json, checkpoint_final.json,
/// reward_curve.csv/.svg and train.json into `out`.
rl::TrainResult train_controller(const TrainRequest& request, const std::filesystem::path& out);

struct EvalResult {
  EpisodeRecord record;
  MetricsReport metrics;
};

/// Runs one episode and writes timeseries.csv, metrics.json and plots into `out`.
EvalResult evaluate(const ScenarioSpec& spec, ensemble::ControllerKind kind, const rl::PolicyCheckpoint* checkpoint,
                    const std::filesystem::path& out);

struct CompareRow {
  std::string scenario;
  std::string controller;
  std::optional<MetricsReport> metrics;  // empty when the cell was skipped
  std::string status;                    // "ok", "missing" or a fault category
  bool best = false;
};

/// Locates <dir>/<kind>.json or <dir>/<kind>/checkpoint_final.json.
std::optional<std::filesystem::path> find_checkpoint(const std::filesystem::path& dir, ensemble::ControllerKind kind);

/// Every scenario against mpc, ac and ac2mpc; writes metrics.csv, metrics.json,
/// runs/<scenario>_<controller>.csv and SVG plots into `out`.
std::vector<CompareRow> compare(const std::vector<std::string>& scenarios, const std::filesystem::path& checkpoints,
                                const std::filesystem::path& out);

/// Marks the lowest delta_v_rms per scenario.
void mark_best(std::vector<CompareRow>& rows);

/// Regenerates the SVG plots of a train, eval or compare output directory.
/// Returns the files written.
std::vector<std::filesystem::path> plot_run(const std::filesystem::path& run);

}  // namespace ac2mpc::harness

#endif  // AC2MPC_HARNESS_COMMANDS_HPP
