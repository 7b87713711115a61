#include "ac2mpc/harness/commands.hpp"

#include "ac2mpc/harness/svg.hpp"

#include <chrono>
#include <fstream>
#include <map>

namespace ac2mpc::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using ensemble::ControllerKind;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

json metrics_json(const EpisodeRecord& rec, const MetricsReport& m) {
  return json{{"scenario", rec.scenario},
              {"controller", rec.controller},
              {"delta_v_rms", m.delta_v_rms},
              {"rms_jerk", m.rms_jerk},
              {"steps", rec.rows.size()},
              {"degenerate_steps", rec.degenerate_steps},
              {"fault", to_string(rec.fault)},
              {"fault_message", rec.fault_message}};
}

std::vector<double> column(const std::vector<EpisodeRow>& rows, double EpisodeRow::*field) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.*field);
  return out;
}

PlotSpec velocity_plot(const std::string& title, const std::vector<std::pair<std::string, std::vector<EpisodeRow>>>& runs) {
  PlotSpec p{title, "time [s]", "speed [m/s]", {}};
  if (runs.empty()) return p;
  p.series.push_back({"v_ref", column(runs.front().second, &EpisodeRow::time),
                      column(runs.front().second, &EpisodeRow::v_ref), true});
  for (const auto& [name, rows] : runs) p.series.push_back({name, column(rows, &EpisodeRow::time), column(rows, &EpisodeRow::v)});
  return p;
}

PlotSpec input_plot(const std::string& title, const std::vector<EpisodeRow>& rows) {
  const auto t = column(rows, &EpisodeRow::time);
  return {title,
          "time [s]",
          "throttle [-]",
          {{"u_mpc", t, column(rows, &EpisodeRow::u_mpc)},
           {"u_rl", t, column(rows, &EpisodeRow::u_rl)},
           {"u_applied", t, column(rows, &EpisodeRow::u_applied), true}}};
}

PlotSpec reward_plot(const std::string& title, const std::vector<std::pair<std::string, std::vector<rl::CurvePoint>>>& curves) {
  PlotSpec p{title, "environment steps", "mean episode reward", {}};
  for (const auto& [name, curve] : curves) {
    Series s{name, {}, {}};
    for (const auto& c : curve) {
      s.x.push_back(static_cast<double>(c.env_steps));
      s.y.push_back(c.mean_episode_reward);
    }
    p.series.push_back(std::move(s));
  }
  return p;
}

}  // namespace

rl::TrainResult train_controller(const TrainRequest& request, const fs::path& out) {
  if (request.kind == ControllerKind::Mpc) throw ValidationError("train: --controller must be ac or ac2mpc");
  if (request.budget < 0) throw ValidationError("train: --budget must be >= 0");
  fs::create_directories(out);

  ensemble::CompensatorConfig config = request.config;
  config.ppo.seed = request.seed;
  rl::TrainOptions opt;
  opt.controller = ensemble::to_string(request.kind);
  opt.budget_steps = request.budget;
  opt.workers = request.workers;
  opt.checkpoint_steps = request.checkpoint_steps;
  opt.on_checkpoint = [&](const rl::PolicyCheckpoint& cp) {
    cp.save(out / ("checkpoint_" + std::to_string(cp.env_steps) + ".json"));
  };
  rl::TrainResult res = rl::train_ppo(scenario_env_factory(request.scenario, request.kind, config), config.ppo, opt);
  res.final_checkpoint.save(out / "checkpoint_final.json");
  rl::write_reward_curve_csv(out / "reward_curve.csv", res.curve);
  write_svg(reward_plot("Training reward, " + opt.controller + " on " + request.scenario.id, {{opt.controller, res.curve}}),
            out / "reward_curve.svg");

  json summary{{"controller", opt.controller},
               {"scenario", request.scenario.id},
               {"budget", request.budget},
               {"workers", request.workers},
               {"seed", request.seed},
               {"env_steps", res.final_checkpoint.env_steps},
               {"steps_to_plateau", rl::steps_to_plateau(res.curve)},
               {"retired_workers", res.retired_workers},
               {"aborted", res.aborted},
               {"faults", res.faults}};
  json cps = json::array();
  for (const auto& cp : res.checkpoints) cps.push_back("checkpoint_" + std::to_string(cp.env_steps) + ".json");
  cps.push_back("checkpoint_final.json");
  summary["checkpoints"] = cps;
  save_scenario(request.scenario, out / "scenario.json");
  write_text(out / "train.json", summary.dump(2) + "\n");
  return res;
}

EvalResult evaluate(const ScenarioSpec& spec, ControllerKind kind, const rl::PolicyCheckpoint* checkpoint,
                    const fs::path& out) {
  fs::create_directories(out);
  EvalResult r;
  r.record = run_episode(spec, kind, checkpoint);
  r.metrics = r.record.rows.empty() ? MetricsReport{} : compute_metrics(r.record);
  write_episode_csv(r.record, out / "timeseries.csv");
  write_text(out / "metrics.json", metrics_json(r.record, r.metrics).dump(2) + "\n");
  save_scenario(spec, out / "scenario.json");
  plot_run(out);
  return r;
}

std::optional<fs::path> find_checkpoint(const fs::path& dir, ControllerKind kind) {
  const std::string name = ensemble::to_string(kind);
  for (const fs::path& p : {dir / (name + ".json"), dir / name / "checkpoint_final.json"})
    if (fs::is_regular_file(p)) return p;
  return std::nullopt;
}

void mark_best(std::vector<CompareRow>& rows) {
  std::map<std::string, CompareRow*> best;
  for (auto& r : rows) {
    r.best = false;
    if (!r.metrics) continue;
    auto& b = best[r.scenario];
    if (b == nullptr || r.metrics->delta_v_rms < b->metrics->delta_v_rms) b = &r;
  }
  for (auto& [_, r] : best) r->best = true;
}

std::vector<CompareRow> compare(const std::vector<std::string>& scenarios, const fs::path& checkpoints,
                                const fs::path& out) {
  if (scenarios.empty()) throw ValidationError("compare: --scenarios must name at least one scenario");
  std::vector<ScenarioSpec> specs;
  for (const auto& id : scenarios) specs.push_back(load_scenario(id));
  fs::create_directories(out / "runs");

  std::map<ControllerKind, std::optional<rl::PolicyCheckpoint>> loaded;
  for (ControllerKind k : {ControllerKind::Ac, ControllerKind::Ac2mpc}) {
    if (const auto p = find_checkpoint(checkpoints, k)) {
      loaded[k] = rl::PolicyCheckpoint::load(*p);
      ensemble::check_checkpoint(*loaded[k], k);
    }
  }

  std::vector<CompareRow> rows;
  for (const auto& spec : specs) {
    std::vector<std::pair<std::string, std::vector<EpisodeRow>>> runs;
    for (ControllerKind k : {ControllerKind::Mpc, ControllerKind::Ac, ControllerKind::Ac2mpc}) {
      CompareRow row{spec.id, ensemble::to_string(k), std::nullopt, "ok", false};
      const rl::PolicyCheckpoint* cp = nullptr;
      if (k != ControllerKind::Mpc) {
        if (!loaded[k]) {
          row.status = "missing";
          rows.push_back(row);
          continue;
        }
        cp = &*loaded[k];
      }
      const EpisodeRecord rec = run_episode(spec, k, cp);
      write_episode_csv(rec, out / "runs" / (spec.id + "_" + row.controller + ".csv"));
      if (rec.truncated()) row.status = to_string(rec.fault);
      if (!rec.rows.empty()) row.metrics = compute_metrics(rec);
      runs.emplace_back(row.controller, rec.rows);
      rows.push_back(row);
    }
    write_svg(velocity_plot("Speed tracking, scenario " + spec.id, runs), out / ("velocity_" + spec.id + ".svg"));
  }
  mark_best(rows);

  std::ofstream csv(out / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write " + (out / "metrics.csv").string());
  csv << "scenario,controller,delta_v_rms,rms_jerk,best,status\n";
  json jrows = json::array();
  for (const auto& r : rows) {
    csv << r.scenario << ',' << r.controller << ',' << (r.metrics ? format_double(r.metrics->delta_v_rms) : "")
        << ',' << (r.metrics ? format_double(r.metrics->rms_jerk) : "") << ',' << (r.best ? "*" : "") << ','
        << r.status << '\n';
    json jr{{"scenario", r.scenario}, {"controller", r.controller}, {"best", r.best}, {"status", r.status}};
    jr["delta_v_rms"] = r.metrics ? json(r.metrics->delta_v_rms) : json(nullptr);
    jr["rms_jerk"] = r.metrics ? json(r.metrics->rms_jerk) : json(nullptr);
    jrows.push_back(jr);
  }
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  json doc{{"metadata", {{"generated_unix_s", std::chrono::duration_cast<std::chrono::seconds>(now).count()},
                         {"checkpoints", checkpoints.string()}}},
           {"rows", jrows}};
  write_text(out / "metrics.json", doc.dump(2) + "\n");

  std::vector<std::pair<std::string, std::vector<rl::CurvePoint>>> curves;
  for (ControllerKind k : {ControllerKind::Ac, ControllerKind::Ac2mpc}) {
    const fs::path f = checkpoints / ensemble::to_string(k) / "reward_curve.csv";
    if (fs::is_regular_file(f)) curves.emplace_back(ensemble::to_string(k), rl::read_reward_curve_csv(f));
  }
  if (!curves.empty()) write_svg(reward_plot("Training reward", curves), out / "reward_curves.svg");
  return rows;
}

std::vector<fs::path> plot_run(const fs::path& run) {
  if (!fs::is_directory(run)) throw ValidationError("plot: '" + run.string() + "' is not a directory");
  std::vector<fs::path> written;
  auto emit = [&](const PlotSpec& p, const fs::path& f) {
    write_svg(p, f);
    written.push_back(f);
  };
  if (fs::is_regular_file(run / "timeseries.csv")) {
    const auto rows = read_episode_csv(run / "timeseries.csv");
    emit(velocity_plot("Speed tracking", {{"v", rows}}), run / "velocity.svg");
    emit(input_plot("Throttle inputs", rows), run / "inputs.svg");
  }
  if (fs::is_regular_file(run / "reward_curve.csv")) {
    emit(reward_plot("Training reward", {{"reward", rl::read_reward_curve_csv(run / "reward_curve.csv")}}),
         run / "reward_curve.svg");
  }
  if (fs::is_directory(run / "runs")) {
    std::map<std::string, std::vector<std::pair<std::string, std::vector<EpisodeRow>>>> by_scenario;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(run / "runs"))
      if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string stem = f.stem().string();
      const auto cut = stem.find('_');
      if (cut == std::string::npos) continue;
      by_scenario[stem.substr(0, cut)].emplace_back(stem.substr(cut + 1), read_episode_csv(f));
    }
    for (const auto& [id, runs] : by_scenario) {
      emit(velocity_plot("Speed tracking, scenario " + id, runs), run / ("velocity_" + id + ".svg"));
      for (const auto& [name, rows] : runs) {
        emit(input_plot("Throttle inputs, " + name + " on " + id, rows), run / ("inputs_" + id + "_" + name + ".svg"));
      }
    }
  }
  if (written.empty()) throw ValidationError("plot: no timeseries.csv, reward_curve.csv or runs/ in " + run.string());
  return written;
}

}  // namespace ac2mpc::harness
