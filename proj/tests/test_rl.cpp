#include "ac2mpc/rl/checkpoint.hpp"
#include "ac2mpc/rl/trainer.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <atomic>

using namespace ac2mpc;
using namespace ac2mpc::rl;

namespace {

Vector random_obs(oracle::Gen& g, int n) {
  Vector o(n);
  o[0] = g.uniform(0.0, 15.0);
  o[1] = g.uniform(0.0, 15.0);
  for (int i = 2; i < n; ++i) o[i] = g.uniform(-1.0, 1.0);
  return o;
}

ActorCritic random_model(std::uint64_t seed, int n = kAcObservationSize) {
  ActorCritic m(n);
  std::mt19937_64 rng(seed);
  m.initialize(rng);
  // Larger output layer than the default init, so the tests see a non-trivial mean.
  m.actor.mean_net().initialize(rng, 1.0);
  Vector scale = Vector::Ones(n);
  scale.head(2).setConstant(0.1);
  m.actor.set_input_scale(scale);
  return m;
}

// Transition-by-transition generalized advantage estimation with explicit sums.
struct NaiveGae {
  std::vector<double> adv, ret;
};

NaiveGae naive_gae(const RolloutBuffer& b, double gamma, double lambda) {
  const std::size_t n = b.size();
  std::vector<std::size_t> seg_end(n);
  std::vector<double> next_value(n);
  std::size_t start = 0;
  for (std::size_t s = 0; s <= b.segment_ends.size(); ++s) {
    const std::size_t end = s < b.segment_ends.size() ? b.segment_ends[s] : n;
    const double boot = s < b.bootstrap_values.size() ? b.bootstrap_values[s] : 0.0;
    for (std::size_t t = start; t < end; ++t) {
      seg_end[t] = end;
      next_value[t] = t + 1 < end ? b.values[t + 1] : boot;
    }
    start = end;
  }
  NaiveGae out;
  for (std::size_t t = 0; t < n; ++t) {
    double a = 0.0, w = 1.0;
    for (std::size_t k = t; k < seg_end[t]; ++k) {
      const double delta = b.rewards[k] + gamma * next_value[k] * (b.dones[k] ? 0.0 : 1.0) - b.values[k];
      a += w * delta;
      if (b.dones[k]) break;
      w *= gamma * lambda;
    }
    out.adv.push_back(a);
    out.ret.push_back(a + b.values[t]);
  }
  return out;
}

}  // namespace

TEST_SUITE("rl") {

TEST_CASE("network layout and forward pass") {
  CHECK(layer_sizes(12, 1) == std::vector<int>{12, 8, 32, 16, 8, 1});
  Mlp<double> net(layer_sizes(12, 1));
  CHECK(net.parameter_count() == 12 * 8 + 8 + 8 * 32 + 32 + 32 * 16 + 16 + 16 * 8 + 8 + 8 + 1);
  net.bias(net.layers() - 1)[0] = 0.37;
  oracle::Gen g(41);
  for (int i = 0; i < 10; ++i) CHECK(net.forward_one(random_obs(g, 12))[0] == 0.37);

  // 1-1-1 chain by hand: relu(2x - 1) * 3 + 0.5.
  Mlp<double> chain({1, 1, 1});
  chain.parameters() << 2.0, -1.0, 3.0, 0.5;
  CHECK(chain.forward_one(Vector::Constant(1, 1.0))[0] == 3.5);
  CHECK(chain.forward_one(Vector::Constant(1, -1.0))[0] == 0.5);
  CHECK(chain.forward_one(Vector::Constant(1, 2.0))[0] == 9.5);
}

TEST_CASE("network backpropagation matches central differences") {
  Mlp<double> net({4, 8, 32, 16, 8, 2});
  std::mt19937_64 rng(42);
  net.initialize(rng);
  oracle::Gen g(43);
  Mlp<double>::Mat X = Mlp<double>::Mat::NullaryExpr(4, 5, [&] { return g.normal(); });
  Mlp<double>::Mat W = Mlp<double>::Mat::NullaryExpr(2, 5, [&] { return g.normal(); });
  Mlp<double>::Tape tape;
  net.forward(X, tape);
  const Vector grad = net.backward(tape, W);
  Vector fd(grad.size());
  const double h = 1e-6;
  for (int i = 0; i < fd.size(); ++i) {
    Mlp<double> up = net, dn = net;
    up.parameters()[i] += h;
    dn.parameters()[i] -= h;
    fd[i] = ((up.forward(X).cwiseProduct(W)).sum() - (dn.forward(X).cwiseProduct(W)).sum()) / (2 * h);
  }
  CHECK((grad - fd).norm() <= 1e-6 * fd.norm());
}

TEST_CASE("Gaussian policy density, sampling and clipping") {
  CHECK(gaussian_log_prob(0.3, 0.3, -0.5) == doctest::Approx(-0.5 * std::log(2 * M_PI) + 0.5).epsilon(1e-15));

  const ActorCritic m = random_model(44);
  oracle::Gen g(45);
  for (int i = 0; i < 10; ++i) {
    const Vector obs = random_obs(g, kAcObservationSize);
    const double mu = m.actor.mean(obs), sigma = std::exp(m.actor.log_std());
    const double mass = oracle::integrate([&](double x) { return std::exp(m.actor.log_prob(obs, x)); },
                                          mu - 12 * sigma, mu + 12 * sigma, 1e-10);
    CHECK(std::abs(mass - 1.0) < 1e-6);
    CHECK(m.actor.log_prob(obs, mu) == doctest::Approx(-0.5 * std::log(2 * M_PI) - m.actor.log_std()));
  }

  GaussianPolicy sharp = m.actor;
  sharp.set_log_std(-20.0);
  std::mt19937_64 rng(46);
  for (int i = 0; i < 50; ++i) {
    const Vector obs = random_obs(g, kAcObservationSize);
    const PolicySample s = policy_sample(sharp, obs, rng);
    CHECK(s.action == doctest::Approx(std::clamp(sharp.mean(obs), -1.0, 1.0)).epsilon(1e-7));
    CHECK(sharp.act(obs) == std::clamp(sharp.mean(obs), -1.0, 1.0));
  }

  // Monte Carlo mean of the pre-clip samples.
  const Vector obs = random_obs(g, kAcObservationSize);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const PolicySample s = policy_sample(m.actor, obs, rng);
    CHECK_MESSAGE(std::abs(s.action) <= 1.0, "emitted action out of bounds");
    CHECK(s.log_prob == doctest::Approx(m.actor.log_prob(obs, s.raw)).epsilon(1e-12));
    sum += s.raw;
  }
  const double sigma = std::exp(m.actor.log_std());
  CHECK(std::abs(sum / n - m.actor.mean(obs)) < 3.0 * sigma / std::sqrt(double(n)));

  GaussianPolicy broken = m.actor;
  broken.mean_net().parameters()[0] = std::nan("");
  CHECK_THROWS(policy_sample(broken, Vector::Ones(kAcObservationSize), rng));
}

TEST_CASE("clipped objective") {
  CHECK(clipped_objective(1.3, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_objective(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  oracle::Gen g(47);
  for (int i = 0; i < 1000; ++i) {
    const double r = g.uniform(0.0, 3.0), a = g.uniform(-5.0, 5.0), eps = 0.2;
    const double unclipped = r * a, clipped = std::clamp(r, 1 - eps, 1 + eps) * a;
    const double obj = clipped_objective(r, a, eps);
    CHECK(obj == std::min(unclipped, clipped));
    CHECK(obj <= std::max(unclipped, clipped));
    const bool in_band = r >= 1 - eps && r <= 1 + eps;
    if (a != 0.0) CHECK((unclipped == clipped) == in_band);
  }
}

TEST_CASE("advantage estimation") {
  RolloutBuffer one;
  one.add(Vector::Zero(1), 0.0, 2.0, 0.5, 0.0, true);
  GaeResult r = gae_advantages(one, 0.99, 0.95);
  CHECK(r.advantages[0] == doctest::Approx(1.5));
  CHECK(r.returns[0] == doctest::Approx(2.0));

  oracle::Gen g(48);
  RolloutBuffer b;
  for (int seg = 0; seg < 4; ++seg) {
    const int len = g.integer(1, 30);
    for (int t = 0; t < len; ++t) {
      const bool done = t == len - 1 && seg % 2 == 0;
      b.add(Vector::Zero(1), 0.0, g.uniform(-1, 1), g.uniform(-2, 2), 0.0, done);
    }
    b.end_segment(g.uniform(-2, 2));
  }
  for (int t = 0; t < 7; ++t) b.add(Vector::Zero(1), 0.0, g.uniform(-1, 1), g.uniform(-2, 2), 0.0, false);

  for (auto [gamma, lambda] : {std::pair{0.99, 0.95}, {0.9, 0.0}, {1.0, 1.0}, {0.5, 0.7}}) {
    const GaeResult fast = gae_advantages(b, gamma, lambda);
    const NaiveGae slow = naive_gae(b, gamma, lambda);
    for (std::size_t t = 0; t < b.size(); ++t) {
      CHECK(fast.advantages[t] == doctest::Approx(slow.adv[t]).epsilon(1e-12));
      CHECK(fast.returns[t] == doctest::Approx(slow.ret[t]).epsilon(1e-12));
    }
  }

  // lambda = 0: one-step temporal difference.
  RolloutBuffer td;
  td.add(Vector::Zero(1), 0.0, 1.0, 0.3, 0.0, false);
  td.add(Vector::Zero(1), 0.0, 0.5, 0.7, 0.0, false);
  td.end_segment(0.2);
  r = gae_advantages(td, 0.9, 0.0);
  CHECK(r.advantages[0] == doctest::Approx(1.0 + 0.9 * 0.7 - 0.3));
  CHECK(r.advantages[1] == doctest::Approx(0.5 + 0.9 * 0.2 - 0.7));

  // gamma = lambda = 1 and zero values: reward-to-go.
  RolloutBuffer mc;
  const std::vector<double> rewards = {1.0, -2.0, 0.5, 3.0};
  for (std::size_t t = 0; t < rewards.size(); ++t) mc.add(Vector::Zero(1), 0.0, rewards[t], 0.0, 0.0, t + 1 == rewards.size());
  r = gae_advantages(mc, 1.0, 1.0);
  CHECK(r.advantages[0] == doctest::Approx(2.5));
  CHECK(r.advantages[1] == doctest::Approx(1.5));
  CHECK(r.advantages[3] == doctest::Approx(3.0));
}

TEST_CASE("advantage normalization") {
  oracle::Gen g(49);
  for (int i = 0; i < 20; ++i) {
    Vector a = Vector::NullaryExpr(g.integer(2, 500), [&] { return g.uniform(-50, 80); });
    const Vector z = normalize_advantages(a);
    const double mean = z.mean();
    const double sd = std::sqrt((z.array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(sd - 1.0) < 1e-6);
  }
  CHECK(normalize_advantages(Vector::Constant(5, 3.0)).isZero());
}

TEST_CASE("Adam reproduces the hand-computed first two steps") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Vector theta(2);
  theta << 1.0, -2.0;
  const Vector g1 = (Vector(2) << 0.5, -0.1).finished();
  const Vector g2 = (Vector(2) << 0.2, 0.3).finished();
  Adam adam(2, lr, b1, b2, eps);
  adam.step(theta, g1);
  Vector want(2);
  for (int i = 0; i < 2; ++i) want[i] = (i == 0 ? 1.0 : -2.0) - lr * g1[i] / (std::abs(g1[i]) + eps);
  CHECK((theta - want).norm() < 1e-14);
  adam.step(theta, g2);
  for (int i = 0; i < 2; ++i) {
    const double m = b1 * (1 - b1) * g1[i] + (1 - b1) * g2[i];
    const double v = b2 * (1 - b2) * g1[i] * g1[i] + (1 - b2) * g2[i] * g2[i];
    want[i] -= lr * (m / (1 - b1 * b1)) / (std::sqrt(v / (1 - b2 * b2)) + eps);
  }
  CHECK((theta - want).norm() < 1e-14);
  CHECK(adam.steps() == 2);
}

TEST_CASE("surrogate loss gradient matches central differences over all parameters") {
  ActorCritic m = random_model(50);
  PpoConfig cfg;
  cfg.entropy_coeff = 0.01;
  oracle::Gen g(51);
  const int B = 40;
  Minibatch mb;
  mb.observations.resize(kAcObservationSize, B);
  mb.actions.resize(B);
  mb.old_log_probs.resize(B);
  mb.advantages.resize(B);
  mb.returns.resize(B);
  const double ratios[] = {0.5, 1.0, 1.6};
  for (int j = 0; j < B; ++j) {
    const Vector obs = random_obs(g, kAcObservationSize);
    mb.observations.col(j) = obs;
    mb.actions[j] = m.actor.mean(obs) + 0.6 * g.normal();
    mb.old_log_probs[j] = m.actor.log_prob(obs, mb.actions[j]) - std::log(ratios[j % 3]);
    mb.advantages[j] = g.normal();
    mb.returns[j] = g.normal();
  }
  const LossEvaluation ev = ppo_loss(m, mb, cfg);
  const Vector theta = m.flat();
  Vector fd(theta.size());
  const double h = 1e-6;
  for (int i = 0; i < theta.size(); ++i) {
    ActorCritic up = m, dn = m;
    Vector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    up.set_flat(tp);
    dn.set_flat(tm);
    fd[i] = (ppo_loss(up, mb, cfg, false).loss - ppo_loss(dn, mb, cfg, false).loss) / (2 * h);
  }
  const double rel = (ev.gradient - fd).norm() / fd.norm();
  CAPTURE(rel);
  CHECK(rel < 1e-4);
  CHECK((ev.gradient - fd).cwiseAbs().maxCoeff() <= 1e-4 * fd.cwiseAbs().maxCoeff());
}

TEST_CASE("update restores parameters on a non-finite loss") {
  ActorCritic m = random_model(52);
  PpoConfig cfg;
  RolloutBuffer b;
  oracle::Gen g(53);
  for (int t = 0; t < cfg.steps_per_epoch; ++t)
    b.add(random_obs(g, kAcObservationSize), g.normal(), g.normal(), 0.0, -1.0, false);
  b.end_segment(0.0);
  b.advantages = Vector::NullaryExpr(b.size(), [&] { return g.normal(); });
  b.returns = Vector::Constant(b.size(), std::nan(""));
  Adam adam(m.parameter_count(), cfg.learning_rate);
  std::mt19937_64 rng(1);
  const Vector before = m.flat();
  const UpdateDiagnostics d = ppo_update(m, adam, b, cfg, rng);
  CHECK(d.fault);
  CHECK(m.flat() == before);
}

TEST_CASE("checkpoint round trip reproduces forward passes bitwise") {
  PolicyCheckpoint cp;
  cp.controller = "ac";
  cp.model = random_model(54);
  cp.model.actor.set_log_std(-0.7312345678901234);
  cp.config.seed = 99;
  cp.config.learning_rate = 0.0123;
  cp.env_steps = 12345;
  const PolicyCheckpoint back = PolicyCheckpoint::from_string(cp.to_string());
  const auto dir = oracle::scratch_dir("checkpoint");
  cp.save(dir / "cp.json");
  const PolicyCheckpoint loaded = PolicyCheckpoint::load(dir / "cp.json");
  oracle::Gen g(55);
  for (const PolicyCheckpoint* c : {&back, &loaded}) {
    CHECK(c->controller == "ac");
    CHECK(c->env_steps == 12345);
    CHECK(c->config == cp.config);
    CHECK(c->format_version == PolicyCheckpoint::kFormatVersion);
    CHECK(c->observation_size() == kAcObservationSize);
    CHECK(c->model.flat() == cp.model.flat());
    for (int i = 0; i < 100; ++i) {
      const Vector obs = random_obs(g, kAcObservationSize);
      CHECK(c->model.actor.mean(obs) == cp.model.actor.mean(obs));
      CHECK(c->model.value(obs) == cp.model.value(obs));
    }
  }
  CHECK_THROWS(PolicyCheckpoint::from_string("{\"format_version\": 1}"));
  CHECK_THROWS(PolicyCheckpoint::from_string("not json"));
}

TEST_CASE("agent observation layout") {
  History h;
  Vector o = build_observation_ac(0.0, 10.0, h);
  REQUIRE(o.size() == 12);
  CHECK(o[0] == 0.0);
  CHECK(o[1] == 10.0);
  CHECK(o.tail(10).isZero());
  h.push(0.5);
  o = build_observation_ac(3.0, 10.0, h);
  CHECK(o.size() == 12);
  CHECK(o[2] == 0.5);
  CHECK(o.tail(9).isZero());
  for (int i = 0; i < 25; ++i) h.push(i);
  CHECK(build_observation_ac(1, 2, h).size() == 12);
  CHECK(build_observation_ac(1, 2, h)[2] == 24.0);
  CHECK(build_observation_ac(1, 2, h)[11] == 15.0);
}

TEST_CASE("tracking reward with smoothness and reversing terms") {
  History constant;
  for (int i = 0; i < 10; ++i) constant.push(0.4);
  const RewardWeights w;
  CHECK(reward_r1(0.0, constant, 3.0, w) == doctest::Approx(1.0));
  CHECK(reward_r1(1.0, constant, 3.0, w) == doctest::Approx(0.5));
  CHECK(reward_r1(-1.0, constant, 3.0, w) == doctest::Approx(0.5));
  CHECK(reward_r1(0.0, constant, -0.1, w) == doctest::Approx(1.0 - w.reverse));

  History alternating;
  for (int i = 0; i < 10; ++i) alternating.push(i % 2 ? 1.0 : -1.0);
  CHECK(alternating.stddev() == doctest::Approx(1.0));
  CHECK(reward_r1(0.0, alternating, 1.0, w) == doctest::Approx(1.0 - w.smoothness));

  oracle::Gen g(56);
  for (int i = 0; i < 500; ++i) {
    History h;
    for (int k = 0; k < g.integer(0, 15); ++k) h.push(g.uniform(-1, 1));
    const double r = reward_r1(g.uniform(-20, 20), h, g.uniform(-1, 20), w);
    CHECK(r >= -w.smoothness - w.reverse);
    CHECK(r <= w.tracking);
  }
}

TEST_CASE("training with zero budget returns the initial policy") {
  PpoConfig cfg;
  cfg.seed = 3;
  TrainOptions opt;
  opt.budget_steps = 0;
  const TrainResult r = train_ppo([] { return std::make_unique<DoubleIntegratorEnv>(); }, cfg, opt);
  CHECK(r.curve.empty());
  CHECK(r.checkpoints.empty());
  CHECK(r.final_checkpoint.env_steps == 0);
  CHECK(r.final_checkpoint.model.actor.log_std() == kInitialLogStd);
  CHECK(r.final_checkpoint.model.flat().allFinite());
  CHECK(r.final_checkpoint.model.flat().norm() > 0.0);
  CHECK(steps_to_plateau(r.curve) == -1);
}

TEST_CASE("fixed seed gives identical reward curves; workers fan out") {
  PpoConfig cfg;
  cfg.seed = 7;
  TrainOptions opt;
  opt.budget_steps = 2400;
  auto make = [] { return std::make_unique<DoubleIntegratorEnv>(); };
  const TrainResult a = train_ppo(make, cfg, opt), b = train_ppo(make, cfg, opt);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].env_steps == b.curve[i].env_steps);
    CHECK(a.curve[i].mean_episode_reward == b.curve[i].mean_episode_reward);
  }
  CHECK(a.final_checkpoint.model.flat() == b.final_checkpoint.model.flat());
  REQUIRE(a.checkpoints.size() == 1);
  CHECK(a.checkpoints[0].env_steps >= 2000);

  opt.workers = 4;
  const TrainResult c = train_ppo(make, cfg, opt), d = train_ppo(make, cfg, opt);
  CHECK(c.final_checkpoint.env_steps == 2400);
  CHECK(c.final_checkpoint.model.flat() == d.final_checkpoint.model.flat());
  CHECK(split_seed(7, 0) != split_seed(7, 1));
  CHECK(split_seed(7, 0) != split_seed(8, 0));
}

TEST_CASE("a faulting worker is retired; all faulting aborts") {
  struct Faulty : DoubleIntegratorEnv {
    StepResult step(double a) override {
      if (++n > 50) throw PlantFault("synthetic fault");
      return DoubleIntegratorEnv::step(a);
    }
    int n = 0;
  };
  std::atomic<int> made{0};
  PpoConfig cfg;
  TrainOptions opt;
  opt.budget_steps = 1200;
  opt.workers = 2;
  const TrainResult partial = train_ppo(
      [&]() -> std::unique_ptr<Environment> {
        if (made++ == 0) return std::make_unique<Faulty>();
        return std::make_unique<DoubleIntegratorEnv>();
      },
      cfg, opt);
  CHECK(partial.retired_workers == 1);
  CHECK(partial.faults.size() == 1);
  CHECK_FALSE(partial.aborted);
  CHECK(partial.final_checkpoint.env_steps == 1200);

  const TrainResult dead = train_ppo([] { return std::make_unique<Faulty>(); }, cfg, opt);
  CHECK(dead.aborted);
  CHECK(dead.retired_workers == 2);
}

TEST_CASE("plateau detection and reward-curve CSV") {
  std::vector<CurvePoint> curve;
  const double rewards[] = {0, 10, 50, 80, 90, 95, 100, 100, 100, 100};
  for (int i = 0; i < 10; ++i) curve.push_back({300L * (i + 1), rewards[i]});
  CHECK(steps_to_plateau(curve) == 1500);
  CHECK(steps_to_plateau(curve, 0.5) == 900);

  const auto dir = oracle::scratch_dir("curve");
  curve[3].mean_episode_reward = 1.0 / 3.0;
  write_reward_curve_csv(dir / "c.csv", curve);
  const auto back = read_reward_curve_csv(dir / "c.csv");
  REQUIRE(back.size() == curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(back[i].env_steps == curve[i].env_steps);
    CHECK(back[i].mean_episode_reward == curve[i].mean_episode_reward);
  }
}

TEST_CASE("configuration validation") {
  PpoConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.clip_eps = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = PpoConfig{};
  cfg.batch_size = 400;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = PpoConfig{};
  cfg.gae_lambda = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

}  // TEST_SUITE
