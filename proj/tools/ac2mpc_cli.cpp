#include "ac2mpc/harness/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace ac2mpc;
using ensemble::ControllerKind;

enum ExitCode : int { kOk = 0, kOther = 1, kUsage = 2, kValidation = 3, kSolver = 4, kPlant = 5 };

int fault_exit(harness::FaultKind kind) {
  switch (kind) {
    case harness::FaultKind::None: return kOk;
    case harness::FaultKind::Plant: return kPlant;
    case harness::FaultKind::Solver: return kSolver;
    case harness::FaultKind::Validation: return kValidation;
  }
  return kOther;
}

int report(const char* category, const std::exception& e, int code) {
  std::fprintf(stderr, "error [%s]: %s\n", category, e.what());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel MPC + actor-critic speed tracking on deformable terrain"};
  app.require_subcommand(1);

  std::string controller, scenario, out, checkpoint, checkpoints, run;
  long budget = 5000;
  int workers = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> scenarios;

  auto* train = app.add_subcommand("train", "Train an ac or ac2mpc policy with PPO");
  train->add_option("--controller", controller, "ac | ac2mpc")->required()->check(CLI::IsMember({"ac", "ac2mpc"}));
  train->add_option("--scenario", scenario, "Built-in id (1A..3B, C1) or scenario file")->required();
  train->add_option("--budget", budget, "Environment steps")->required()->check(CLI::NonNegativeNumber);
  train->add_option("--workers", workers, "Parallel rollout workers")->check(CLI::PositiveNumber);
  train->add_option("--seed", seed, "Master seed");
  train->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Run one episode and write time series, metrics and plots");
  eval->add_option("--scenario", scenario, "Built-in id or scenario file")->required();
  eval->add_option("--controller", controller, "mpc | ac | ac2mpc")
      ->required()
      ->check(CLI::IsMember({"mpc", "ac", "ac2mpc"}));
  eval->add_option("--checkpoint", checkpoint, "Policy checkpoint (ac, ac2mpc)");
  eval->add_option("--out", out, "Output directory")->required();

  auto* cmp = app.add_subcommand("compare", "Metrics table over scenarios x {mpc, ac, ac2mpc}");
  cmp->add_option("--scenarios", scenarios, "Comma-separated scenario ids or files")->required()->delimiter(',');
  cmp->add_option("--checkpoints", checkpoints, "Directory holding ac/ and ac2mpc/ (or ac.json, ac2mpc.json)")
      ->required();
  cmp->add_option("--out", out, "Output directory")->required();

  auto* plot = app.add_subcommand("plot", "Regenerate SVG plots of a run directory");
  plot->add_option("--run", run, "train, eval or compare output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) {
      harness::TrainRequest req;
      req.kind = ensemble::parse_controller(controller);
      req.scenario = harness::load_scenario(scenario);
      req.budget = budget;
      req.workers = workers;
      req.seed = seed;
      const rl::TrainResult res = harness::train_controller(req, out);
      std::printf("trained %s on %s: %ld env steps, %zu checkpoints, %zu faults\n", controller.c_str(),
                  req.scenario.id.c_str(), res.final_checkpoint.env_steps, res.checkpoints.size() + 1,
                  res.faults.size());
      for (const auto& f : res.faults) std::fprintf(stderr, "worker fault: %s\n", f.c_str());
      return res.aborted ? kPlant : kOk;
    }
    if (*eval) {
      const ControllerKind kind = ensemble::parse_controller(controller);
      const harness::ScenarioSpec spec = harness::load_scenario(scenario);
      std::optional<rl::PolicyCheckpoint> cp;
      if (kind != ControllerKind::Mpc) {
        if (checkpoint.empty()) throw ValidationError("eval: --checkpoint is required for " + controller);
        cp = rl::PolicyCheckpoint::load(checkpoint);
      }
      const harness::EvalResult r = harness::evaluate(spec, kind, cp ? &*cp : nullptr, out);
      std::printf("%s on %s: delta_v_rms %.4f m/s, rms_jerk %.4f m/s^3, %zu steps\n", controller.c_str(),
                  spec.id.c_str(), r.metrics.delta_v_rms, r.metrics.rms_jerk, r.record.rows.size());
      if (r.record.truncated()) {
        std::fprintf(stderr, "error [%s]: %s\n", harness::to_string(r.record.fault).c_str(),
                     r.record.fault_message.c_str());
      }
      return fault_exit(r.record.fault);
    }
    if (*cmp) {
      const auto rows = harness::compare(scenarios, checkpoints, out);
      std::printf("%-8s %-8s %12s %12s\n", "scenario", "ctrl", "dv_rms", "jerk_rms");
      int code = kOk;
      for (const auto& r : rows) {
        if (r.metrics) {
          std::printf("%-8s %-8s %12.4f %12.4f %s%s\n", r.scenario.c_str(), r.controller.c_str(),
                      r.metrics->delta_v_rms, r.metrics->rms_jerk, r.best ? "*" : " ",
                      r.status == "ok" ? "" : (" " + r.status).c_str());
        } else {
          std::printf("%-8s %-8s %12s %12s  %s\n", r.scenario.c_str(), r.controller.c_str(), "-", "-",
                      r.status.c_str());
        }
        if (r.status == "plant") code = kPlant;
        if (r.status == "solver" && code == kOk) code = kSolver;
      }
      return code;
    }
    if (*plot) {
      for (const auto& f : harness::plot_run(run)) std::printf("%s\n", f.string().c_str());
      return kOk;
    }
  } catch (const ValidationError& e) {
    return report("validation", e, kValidation);
  } catch (const SolverFault& e) {
    return report("solver", e, kSolver);
  } catch (const PlantFault& e) {
    return report("plant", e, kPlant);
  } catch (const std::exception& e) {
    return report("error", e, kOther);
  }
  return kOther;
}
