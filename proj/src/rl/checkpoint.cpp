#include "ac2mpc/rl/checkpoint.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ac2mpc::rl {

using nlohmann::json;

namespace {

json to_array(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector from_array(const json& j, Eigen::Index expected, const char* field) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != expected) {
    throw ValidationError(std::string("checkpoint.") + field + ": expected " + std::to_string(expected) +
                          " values, got " + std::to_string(values.size()));
  }
  return Eigen::Map<const Vector>(values.data(), expected);
}

json config_json(const PpoConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"clip_eps", c.clip_eps},
          {"batch_size", c.batch_size},       {"steps_per_epoch", c.steps_per_epoch},
          {"discount_gamma", c.discount_gamma}, {"gae_lambda", c.gae_lambda},
          {"update_epochs", c.update_epochs}, {"kl_stop_threshold", c.kl_stop_threshold},
          {"value_coeff", c.value_coeff},     {"entropy_coeff", c.entropy_coeff},
          {"seed", c.seed}};
}

PpoConfig config_from(const json& j) {
  PpoConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.clip_eps = j.at("clip_eps").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.steps_per_epoch = j.at("steps_per_epoch").get<int>();
  c.discount_gamma = j.at("discount_gamma").get<double>();
  c.gae_lambda = j.at("gae_lambda").get<double>();
  c.update_epochs = j.at("update_epochs").get<int>();
  c.kl_stop_threshold = j.at("kl_stop_threshold").get<double>();
  c.value_coeff = j.at("value_coeff").get<double>();
  c.entropy_coeff = j.at("entropy_coeff").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string PolicyCheckpoint::to_string() const {
  json j;
  j["format_version"] = format_version;
  j["controller"] = controller;
  j["layer_sizes"] = {{"actor", model.actor.mean_net().sizes()}, {"critic", model.critic.sizes()}};
  j["actor_weights"] = to_array(model.actor.mean_net().parameters());
  j["critic_weights"] = to_array(model.critic.parameters());
  j["log_std"] = model.actor.log_std();
  j["input_scale"] = to_array(model.actor.input_scale());
  j["config"] = config_json(config);
  j["env_steps"] = env_steps;
  return j.dump(1);
}

PolicyCheckpoint PolicyCheckpoint::from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint: parse error: ") + e.what());
  }
  try {
    PolicyCheckpoint cp;
    cp.format_version = j.at("format_version").get<int>();
    if (cp.format_version != kFormatVersion) {
      throw ValidationError("checkpoint.format_version: unsupported version " + std::to_string(cp.format_version));
    }
    cp.controller = j.at("controller").get<std::string>();
    const auto actor_sizes = j.at("layer_sizes").at("actor").get<std::vector<int>>();
    const auto critic_sizes = j.at("layer_sizes").at("critic").get<std::vector<int>>();
    if (actor_sizes.empty() || critic_sizes.empty() || actor_sizes.front() != critic_sizes.front()) {
      throw ValidationError("checkpoint.layer_sizes: actor and critic inputs disagree");
    }
    if (actor_sizes.back() != 1 || critic_sizes.back() != 1) {
      throw ValidationError("checkpoint.layer_sizes: actor and critic must have one output");
    }
    cp.model.actor = GaussianPolicy(actor_sizes.front());
    cp.model.actor.mean_net() = Mlp<double>(actor_sizes);
    cp.model.critic = Mlp<double>(critic_sizes);
    cp.model.actor.mean_net().parameters() =
        from_array(j.at("actor_weights"), cp.model.actor.mean_net().parameter_count(), "actor_weights");
    cp.model.critic.parameters() = from_array(j.at("critic_weights"), cp.model.critic.parameter_count(), "critic_weights");
    cp.model.actor.set_log_std(j.at("log_std").get<double>());
    cp.model.actor.set_input_scale(from_array(j.at("input_scale"), actor_sizes.front(), "input_scale"));
    cp.config = config_from(j.at("config"));
    cp.env_steps = j.at("env_steps").get<long>();
    return cp;
  } catch (const ValidationError&) {
    throw;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

void PolicyCheckpoint::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << to_string() << '\n';
}

PolicyCheckpoint PolicyCheckpoint::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("checkpoint: cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

}  // namespace ac2mpc::rl
