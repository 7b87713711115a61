#include "ac2mpc/harness/episode.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ac2mpc::harness {

const std::vector<std::string>& episode_columns() {
  static const std::vector<std::string> cols = {"time",  "s_x",       "s_y",    "v",         "v_ref",        "u_mpc",
                                                "u_rl",  "u_applied", "reward", "omega_mpc", "omega_applied"};
  return cols;
}

std::string to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::None: return "none";
    case FaultKind::Plant: return "plant";
    case FaultKind::Solver: return "solver";
    case FaultKind::Validation: return "validation";
  }
  return "?";
}

EpisodeRecord run_episode(const ScenarioSpec& spec, ensemble::ControllerKind kind,
                          const rl::PolicyCheckpoint* checkpoint, const ensemble::CompensatorConfig& config) {
  spec.validate();
  if (kind != ensemble::ControllerKind::Mpc) {
    if (checkpoint == nullptr) throw ValidationError("run_episode: " + ensemble::to_string(kind) + " needs a checkpoint");
    ensemble::check_checkpoint(*checkpoint, kind);
  }
  EpisodeRecord rec;
  rec.scenario = spec.id;
  rec.controller = ensemble::to_string(kind);
  rec.rows.reserve(spec.episode_steps);

  ensemble::ClosedLoop loop(kind, spec.make_plant(), spec.path(), config);
  try {
    for (int k = 0; k < spec.episode_steps; ++k) {
      const double action = checkpoint ? checkpoint->model.actor.act(loop.observation()) : 0.0;
      const ensemble::StepLog log = loop.step(action);
      if (log.mpc_degenerate) ++rec.degenerate_steps;
      EpisodeRow row;
      row.time = log.after.sim_time;
      row.s_x = log.after.s_x;
      row.s_y = log.after.s_y;
      row.v = log.after.speed_v;
      row.v_ref = log.v_ref;
      row.u_mpc = log.u_mpc.throttle_a;
      row.u_rl = log.u_rl;
      row.u_applied = log.applied.throttle_a;
      row.reward = log.reward;
      row.omega_mpc = log.u_mpc.steer_rate_omega;
      row.omega_applied = log.applied.steer_rate_omega;
      rec.rows.push_back(row);
    }
  } catch (const PlantFault& e) {
    rec.fault = FaultKind::Plant;
    rec.fault_message = e.what();
  } catch (const SolverFault& e) {
    rec.fault = FaultKind::Solver;
    rec.fault_message = e.what();
  }
  return rec;
}

EpisodeRecord run_episode(const ScenarioSpec& spec) {
  spec.validate();
  if (spec.controller.kind == ensemble::ControllerKind::Mpc) return run_episode(spec, spec.controller.kind);
  const rl::PolicyCheckpoint cp = rl::PolicyCheckpoint::load(spec.controller.checkpoint);
  return run_episode(spec, spec.controller.kind, &cp);
}

MetricsReport compute_metrics(const std::vector<double>& v, const std::vector<double>& v_ref, double dt) {
  if (v.empty() || v.size() != v_ref.size()) throw ValidationError("metrics: need equally sized, non-empty series");
  MetricsReport m;
  double se = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) se += (v[k] - v_ref[k]) * (v[k] - v_ref[k]);
  m.delta_v_rms = std::sqrt(se / static_cast<double>(v.size()));
  if (v.size() >= 3) {
    double sj = 0.0;
    double a_prev = (v[1] - v[0]) / dt;
    for (std::size_t k = 2; k < v.size(); ++k) {
      const double a = (v[k] - v[k - 1]) / dt;
      const double jerk = (a - a_prev) / dt;
      sj += jerk * jerk;
      a_prev = a;
    }
    m.rms_jerk = std::sqrt(sj / static_cast<double>(v.size() - 2));
  }
  return m;
}

MetricsReport compute_metrics(const EpisodeRecord& record) {
  std::vector<double> v, v_ref;
  for (const auto& r : record.rows) {
    v.push_back(r.v);
    v_ref.push_back(r.v_ref);
  }
  return compute_metrics(v, v_ref);
}

rl::EnvFactory scenario_env_factory(const ScenarioSpec& spec, ensemble::ControllerKind kind,
                                    const ensemble::CompensatorConfig& config) {
  spec.validate();
  return [spec, kind, config] {
    return std::make_unique<ensemble::ClosedLoopEnv>(
        ensemble::ClosedLoop(kind, spec.make_plant(), spec.path(), config), spec.episode_steps);
  };
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_episode_csv(const EpisodeRecord& record, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  const auto& cols = episode_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : record.rows) {
    const double vals[] = {r.time,  r.s_x,       r.s_y,    r.v,         r.v_ref,        r.u_mpc,
                           r.u_rl,  r.u_applied, r.reward, r.omega_mpc, r.omega_applied};
    for (std::size_t i = 0; i < std::size(vals); ++i) out << (i ? "," : "") << format_double(vals[i]);
    out << '\n';
  }
}

std::vector<EpisodeRow> read_episode_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  std::string expected;
  for (const auto& c : episode_columns()) expected += (expected.empty() ? "" : ",") + c;
  if (line != expected) throw ValidationError(file.string() + ": unexpected header");
  std::vector<EpisodeRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double x = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ValidationError(file.string() + ": bad number '" + cell + "'");
      }
      vals.push_back(x);
    }
    if (vals.size() != episode_columns().size()) throw ValidationError(file.string() + ": wrong column count");
    rows.push_back({vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8], vals[9],
                    vals[10]});
  }
  return rows;
}

}  // namespace ac2mpc::harness
