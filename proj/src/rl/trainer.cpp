#include "ac2mpc/rl/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace ac2mpc::rl {

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ stream);
}

namespace {

// Stream tags keep the per-purpose seeds apart.
constexpr std::uint64_t kInitStream = 0x1;
constexpr std::uint64_t kUpdateStream = 0x2ULL << 56;
constexpr std::uint64_t kSampleStream = 0x3ULL << 56;
constexpr std::uint64_t kEpisodeStream = 0x4ULL << 56;

struct Worker {
  int index = 0;
  std::unique_ptr<Environment> env;
  Vector obs;
  bool needs_reset = true;
  long episodes = 0;
  double episode_return = 0.0;
  bool retired = false;

  // Outputs of the latest collection phase.
  RolloutBuffer buffer;
  std::vector<double> finished_returns;
  std::string fault;
};

void collect(Worker& w, const ActorCritic& model, std::uint64_t master, long epoch, int quota) {
  w.buffer.clear();
  w.finished_returns.clear();
  w.fault.clear();
  std::mt19937_64 rng(split_seed(master, kSampleStream ^ (static_cast<std::uint64_t>(epoch) << 16) ^
                                             static_cast<std::uint64_t>(w.index)));
  try {
    for (int t = 0; t < quota; ++t) {
      if (w.needs_reset) {
        w.obs = w.env->reset(split_seed(master, kEpisodeStream ^ (static_cast<std::uint64_t>(w.index) << 32) ^
                                                    static_cast<std::uint64_t>(w.episodes)));
        w.needs_reset = false;
        w.episode_return = 0.0;
      }
      const PolicySample s = policy_sample(model.actor, w.obs, rng);
      const double value = model.value(w.obs);
      StepResult r = w.env->step(s.action);
      if (!std::isfinite(r.reward) || !r.observation.allFinite()) throw PlantFault("environment returned non-finite data");
      const bool terminal = r.done && !r.truncated;
      w.buffer.add(w.obs, s.raw, r.reward, value, s.log_prob, terminal);
      w.episode_return += r.reward;
      if (r.done && r.truncated) w.buffer.end_segment(model.value(r.observation));
      w.obs = std::move(r.observation);
      if (r.done) {
        w.finished_returns.push_back(w.episode_return);
        ++w.episodes;
        w.needs_reset = true;
      }
    }
    if (w.buffer.segment_ends.empty() || w.buffer.segment_ends.back() != w.buffer.size()) {
      w.buffer.end_segment(w.needs_reset ? 0.0 : model.value(w.obs));
    }
  } catch (const std::exception& e) {
    w.fault = "worker " + std::to_string(w.index) + ": " + e.what();
  }
}

PolicyCheckpoint snapshot(const ActorCritic& model, const PpoConfig& config, const TrainOptions& options,
                          long steps) {
  PolicyCheckpoint cp;
  cp.controller = options.controller;
  cp.model = model;
  cp.config = config;
  cp.env_steps = steps;
  return cp;
}

}  // namespace

TrainResult train_ppo(const EnvFactory& make_env, const PpoConfig& config, const TrainOptions& options) {
  config.validate();
  if (options.workers < 1) throw ValidationError("train.workers: must be >= 1");
  if (options.budget_steps < 0) throw ValidationError("train.budget: must be >= 0");

  std::vector<Worker> workers(options.workers);
  for (int i = 0; i < options.workers; ++i) {
    workers[i].index = i;
    workers[i].env = make_env();
  }
  const int obs_size = workers.front().env->observation_size();

  ActorCritic model(obs_size);
  std::mt19937_64 init_rng(split_seed(config.seed, kInitStream));
  model.initialize(init_rng);
  model.actor.set_input_scale(workers.front().env->observation_scale());
  Adam optimizer(model.parameter_count(), config.learning_rate);
  std::mt19937_64 update_rng(split_seed(config.seed, kUpdateStream));

  std::vector<long> pending = options.checkpoint_steps;
  std::sort(pending.begin(), pending.end());
  pending.erase(std::remove_if(pending.begin(), pending.end(), [&](long s) { return s > options.budget_steps; }),
                pending.end());

  TrainResult result;
  long steps = 0;
  for (long epoch = 0; steps < options.budget_steps; ++epoch) {
    std::vector<Worker*> alive;
    for (auto& w : workers)
      if (!w.retired) alive.push_back(&w);
    if (alive.empty()) {
      result.aborted = true;
      break;
    }

    long remaining = options.budget_steps - steps;
    std::vector<int> quota;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const long q = std::min<long>(config.steps_per_epoch, remaining);
      quota.push_back(static_cast<int>(q));
      remaining -= q;
    }

    if (alive.size() == 1) {
      collect(*alive[0], model, config.seed, epoch, quota[0]);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t i = 0; i < alive.size(); ++i) {
        if (quota[i] == 0) continue;
        threads.emplace_back(collect, std::ref(*alive[i]), std::cref(model), config.seed, epoch, quota[i]);
      }
      for (auto& t : threads) t.join();
    }

    RolloutBuffer merged;
    std::vector<double> returns;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      Worker& w = *alive[i];
      if (quota[i] == 0) continue;
      if (!w.fault.empty()) {
        result.faults.push_back(w.fault);
        w.retired = true;
        ++result.retired_workers;
        continue;
      }
      merged.append(w.buffer);
      returns.insert(returns.end(), w.finished_returns.begin(), w.finished_returns.end());
    }
    steps += static_cast<long>(merged.size());
    if (merged.size() == 0) continue;

    const GaeResult gae = gae_advantages(merged, config.discount_gamma, config.gae_lambda);
    merged.advantages = gae.advantages;
    merged.returns = gae.returns;
    const UpdateDiagnostics diag = ppo_update(model, optimizer, merged, config, update_rng);
    if (diag.fault) result.faults.push_back("epoch " + std::to_string(epoch) + ": non-finite loss, update skipped");

    if (!returns.empty()) {
      double mean = 0.0;
      for (double r : returns) mean += r;
      CurvePoint p{steps, mean / static_cast<double>(returns.size())};
      result.curve.push_back(p);
      if (options.on_epoch) options.on_epoch(p);
    }

    while (!pending.empty() && steps >= pending.front()) {
      pending.erase(pending.begin());
      result.checkpoints.push_back(snapshot(model, config, options, steps));
      if (options.on_checkpoint) options.on_checkpoint(result.checkpoints.back());
    }
  }
  result.final_checkpoint = snapshot(model, config, options, steps);
  return result;
}

long steps_to_plateau(const std::vector<CurvePoint>& curve, double fraction, double tail_fraction) {
  if (curve.empty()) return -1;
  const auto n = curve.size();
  const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * n)));
  double plateau = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) plateau += curve[i].mean_episode_reward;
  plateau /= static_cast<double>(tail);
  const double target = plateau >= 0.0 ? fraction * plateau : plateau / fraction;
  for (const auto& p : curve)
    if (p.mean_episode_reward >= target) return p.env_steps;
  return curve.back().env_steps;
}

void write_reward_curve_csv(const std::filesystem::path& file, const std::vector<CurvePoint>& curve) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "env_steps,mean_episode_reward\n" << std::setprecision(17);
  for (const auto& p : curve) out << p.env_steps << ',' << p.mean_episode_reward << '\n';
}

std::vector<CurvePoint> read_reward_curve_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open reward curve " + file.string());
  std::vector<CurvePoint> curve;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    CurvePoint p;
    char comma = 0;
    if (!(ss >> p.env_steps >> comma >> p.mean_episode_reward) || comma != ',') {
      throw ValidationError("malformed reward curve row: " + line);
    }
    curve.push_back(p);
  }
  return curve;
}

Vector DoubleIntegratorEnv::observation_scale() const {
  Vector scale = Vector::Ones(kAcObservationSize);
  scale.head(2).setConstant(1.0 / std::max(p_.v_ref, 1.0));
  return scale;
}

Vector DoubleIntegratorEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  x_ = 0.0;
  v_ = std::uniform_real_distribution<double>(0.0, p_.max_initial_speed)(rng);
  t_ = 0;
  history_.reset();
  return build_observation_ac(v_, p_.v_ref, history_);
}

StepResult DoubleIntegratorEnv::step(double action) {
  const double a = std::clamp(action, -1.0, 1.0);
  // Non-reversing like the vehicle: braking stops at rest.
  const double v_next = std::max(0.0, v_ + p_.gain * a * p_.dt);
  x_ += 0.5 * (v_ + v_next) * p_.dt;
  v_ = v_next;
  history_.push(a);
  ++t_;
  StepResult r;
  r.reward = reward_r1(p_.v_ref - v_, history_, v_);
  r.done = t_ >= p_.episode_steps;
  r.truncated = r.done;
  r.observation = build_observation_ac(v_, p_.v_ref, history_);
  return r;
}

}  // namespace ac2mpc::rl
