#include "ac2mpc/rl/ppo.hpp"

#include <algorithm>
#include <numeric>

namespace ac2mpc::rl {

namespace {
constexpr int kMaxKlHalvings = 10;
}

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
  };
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "ppo.learning_rate: must be > 0");
  require(clip_eps > 0.0 && clip_eps < 1.0, "ppo.clip_eps: must lie in (0, 1)");
  require(discount_gamma > 0.0 && discount_gamma <= 1.0, "ppo.discount_gamma: must lie in (0, 1]");
  require(gae_lambda > 0.0 && gae_lambda <= 1.0, "ppo.gae_lambda: must lie in (0, 1]");
  require(batch_size >= 1, "ppo.batch_size: must be >= 1");
  require(steps_per_epoch >= 1, "ppo.steps_per_epoch: must be >= 1");
  require(batch_size <= steps_per_epoch, "ppo.batch_size: must not exceed steps_per_epoch");
  require(update_epochs >= 1, "ppo.update_epochs: must be >= 1");
  require(kl_stop_threshold > 0.0, "ppo.kl_stop_threshold: must be > 0");
  require(value_coeff >= 0.0, "ppo.value_coeff: must be >= 0");
  require(entropy_coeff >= 0.0, "ppo.entropy_coeff: must be >= 0");
}

void RolloutBuffer::add(const Vector& obs, double raw_action, double reward, double value, double log_prob,
                        bool done) {
  observations.push_back(obs);
  actions.push_back(raw_action);
  rewards.push_back(reward);
  values.push_back(value);
  log_probs.push_back(log_prob);
  dones.push_back(done);
}

void RolloutBuffer::end_segment(double bootstrap_value) {
  segment_ends.push_back(size());
  bootstrap_values.push_back(bootstrap_value);
}

void RolloutBuffer::append(const RolloutBuffer& other) {
  const std::size_t base = size();
  observations.insert(observations.end(), other.observations.begin(), other.observations.end());
  actions.insert(actions.end(), other.actions.begin(), other.actions.end());
  rewards.insert(rewards.end(), other.rewards.begin(), other.rewards.end());
  values.insert(values.end(), other.values.begin(), other.values.end());
  log_probs.insert(log_probs.end(), other.log_probs.begin(), other.log_probs.end());
  dones.insert(dones.end(), other.dones.begin(), other.dones.end());
  for (std::size_t i = 0; i < other.segment_ends.size(); ++i) {
    segment_ends.push_back(base + other.segment_ends[i]);
    bootstrap_values.push_back(other.bootstrap_values[i]);
  }
}

void RolloutBuffer::clear() { *this = RolloutBuffer{}; }

GaeResult gae_advantages(const RolloutBuffer& buffer, double gamma, double lambda) {
  const std::size_t n = buffer.size();
  GaeResult out{Vector::Zero(n), Vector::Zero(n)};

  std::vector<std::size_t> ends = buffer.segment_ends;
  std::vector<double> boots = buffer.bootstrap_values;
  if (ends.empty() || ends.back() != n) {
    ends.push_back(n);
    boots.push_back(0.0);
  }
  std::size_t begin = 0;
  for (std::size_t seg = 0; seg < ends.size(); ++seg) {
    double next_value = boots[seg];
    double next_adv = 0.0;
    for (std::size_t t = ends[seg]; t-- > begin;) {
      const double live = buffer.dones[t] ? 0.0 : 1.0;
      const double delta = buffer.rewards[t] + gamma * next_value * live - buffer.values[t];
      next_adv = delta + gamma * lambda * live * next_adv;
      out.advantages[t] = next_adv;
      next_value = buffer.values[t];
    }
    begin = ends[seg];
  }
  out.returns = out.advantages;
  for (std::size_t t = 0; t < n; ++t) out.returns[t] += buffer.values[t];
  return out;
}

Vector normalize_advantages(const Vector& advantages) {
  if (advantages.size() == 0) return advantages;
  const Vector centered = advantages.array() - advantages.mean();
  const double std = std::sqrt(centered.squaredNorm() / advantages.size());
  return std > 1e-12 ? Vector(centered / std) : Vector(centered);
}

Adam::Adam(int size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Vector& theta, const Vector& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double clipped_objective(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

LossEvaluation ppo_loss(const ActorCritic& model, const Minibatch& batch, const PpoConfig& config,
                        bool with_gradient) {
  const auto B = batch.actions.size();
  const double inv_b = 1.0 / static_cast<double>(B);
  const double eps = config.clip_eps;
  const double ls = model.actor.log_std();
  const double inv_var = std::exp(-2.0 * ls);

  Mlp<double>::Tape actor_tape, critic_tape;
  const Matrix inputs = model.actor.input_scale().asDiagonal() * batch.observations;
  const Matrix mu = model.actor.mean_net().forward(inputs, actor_tape);
  const Matrix V = model.critic.forward(inputs, critic_tape);

  LossEvaluation out;
  Matrix d_mu = Matrix::Zero(1, B);
  Matrix d_v = Matrix::Zero(1, B);
  double d_ls = 0.0;
  int clipped = 0;
  for (Eigen::Index j = 0; j < B; ++j) {
    const double a = batch.actions[j];
    const double A = batch.advantages[j];
    const double logp = gaussian_log_prob(a, mu(0, j), ls);
    const double ratio = std::exp(logp - batch.old_log_probs[j]);
    out.surrogate += clipped_objective(ratio, A, eps) * inv_b;
    out.approx_kl += (batch.old_log_probs[j] - logp) * inv_b;
    if (std::abs(ratio - 1.0) > eps) ++clipped;

    const double in_band = ratio >= 1.0 - eps && ratio <= 1.0 + eps;
    const double clip_r = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    const double d_surr_d_ratio = (in_band || ratio * A < clip_r * A) ? A : 0.0;
    const double diff = a - mu(0, j);
    d_mu(0, j) = -inv_b * d_surr_d_ratio * ratio * diff * inv_var;
    d_ls += -inv_b * d_surr_d_ratio * ratio * (diff * diff * inv_var - 1.0);

    const double verr = V(0, j) - batch.returns[j];
    out.value_loss += verr * verr * inv_b;
    d_v(0, j) = 2.0 * config.value_coeff * verr * inv_b;
  }
  out.entropy = model.actor.entropy();
  out.clip_fraction = static_cast<double>(clipped) * inv_b;
  out.loss = -out.surrogate + config.value_coeff * out.value_loss - config.entropy_coeff * out.entropy;
  d_ls -= config.entropy_coeff;

  if (with_gradient) {
    const int na = model.actor.mean_net().parameter_count();
    out.gradient.resize(model.parameter_count());
    out.gradient.head(na) = model.actor.mean_net().backward(actor_tape, d_mu);
    out.gradient[na] = d_ls;
    out.gradient.tail(model.critic.parameter_count()) = model.critic.backward(critic_tape, d_v);
  }
  return out;
}

namespace {

// Sample estimate of KL(old || current) over the whole buffer.
double buffer_kl(const ActorCritic& model, const Matrix& inputs, const Vector& actions, const Vector& old_log_probs) {
  const Matrix mu = model.actor.mean_net().forward(inputs);
  double kl = 0.0;
  for (Eigen::Index j = 0; j < actions.size(); ++j) {
    kl += old_log_probs[j] - gaussian_log_prob(actions[j], mu(0, j), model.actor.log_std());
  }
  return kl / static_cast<double>(actions.size());
}

}  // namespace

UpdateDiagnostics ppo_update(ActorCritic& model, Adam& optimizer, const RolloutBuffer& buffer,
                             const PpoConfig& config, std::mt19937_64& rng) {
  UpdateDiagnostics diag;
  const std::size_t n = buffer.size();
  if (n == 0) return diag;
  const Vector entry = model.flat();
  const Vector adv = normalize_advantages(buffer.advantages);
  const int obs_size = model.observation_size();
  const int actor_params = model.actor.mean_net().parameter_count() + 1;

  Matrix all_inputs(obs_size, n);
  for (std::size_t i = 0; i < n; ++i) all_inputs.col(i) = buffer.observations[i];
  all_inputs = model.actor.input_scale().asDiagonal() * all_inputs;
  const Vector all_actions = Eigen::Map<const Vector>(buffer.actions.data(), n);
  const Vector all_old = Eigen::Map<const Vector>(buffer.log_probs.data(), n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::min<std::size_t>(n, static_cast<std::size_t>(config.batch_size));

  // Crossing the KL bound freezes the actor; the critic keeps fitting the
  // returns for the remaining passes.
  for (int epoch = 0; epoch < config.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      Minibatch mb{Matrix(obs_size, m), Vector(m), Vector(m), Vector(m), Vector(m)};
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = order[start + k];
        mb.observations.col(k) = buffer.observations[i];
        mb.actions[k] = buffer.actions[i];
        mb.old_log_probs[k] = buffer.log_probs[i];
        mb.advantages[k] = adv[i];
        mb.returns[k] = buffer.returns[i];
      }
      const LossEvaluation eval = ppo_loss(model, mb, config);
      if (!std::isfinite(eval.loss) || !eval.gradient.allFinite()) {
        model.set_flat(entry);
        diag.fault = true;
        return diag;
      }
      diag.value_loss = eval.value_loss;
      if (!diag.early_stopped) {
        diag.surrogate = eval.surrogate;
        diag.clip_fraction = eval.clip_fraction;
        if (eval.approx_kl > config.kl_stop_threshold) diag.early_stopped = true;
      }
      const Vector before = model.flat();
      Vector theta = before;
      Vector grad = eval.gradient;
      if (diag.early_stopped) grad.head(actor_params).setZero();
      optimizer.step(theta, grad);
      if (!theta.allFinite()) {
        model.set_flat(entry);
        diag.fault = true;
        return diag;
      }
      if (diag.early_stopped) {
        theta.head(actor_params) = before.head(actor_params);
        model.set_flat(theta);
        ++diag.minibatch_steps;
        continue;
      }
      // A single Adam step can overshoot the KL bound on its own; shrink the
      // actor part of the step until the bound holds.
      const Vector actor_step = theta.head(actor_params) - before.head(actor_params);
      model.set_flat(theta);
      double kl = buffer_kl(model, all_inputs, all_actions, all_old);
      for (int halving = 0; kl > config.kl_stop_threshold && halving < kMaxKlHalvings; ++halving) {
        theta.head(actor_params) = before.head(actor_params) + std::ldexp(1.0, -(halving + 1)) * actor_step;
        model.set_flat(theta);
        kl = buffer_kl(model, all_inputs, all_actions, all_old);
        diag.early_stopped = true;
      }
      if (kl > config.kl_stop_threshold) {
        theta.head(actor_params) = before.head(actor_params);
        model.set_flat(theta);
      }
      ++diag.minibatch_steps;
    }
  }
  diag.approx_kl = buffer_kl(model, all_inputs, all_actions, all_old);
  return diag;
}

}  // namespace ac2mpc::rl
