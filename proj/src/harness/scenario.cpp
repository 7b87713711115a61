#include "ac2mpc/harness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace ac2mpc::harness {

using nlohmann::json;

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

/// Rejects keys outside `allowed` so that typos do not silently fall back to defaults.
void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
}

const json& field(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) fail(path + "." + key, "missing");
  return j.at(key);
}

double number(const json& j, const std::string& path, const std::string& key) {
  const json& v = field(j, path, key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double number_or(const json& j, const std::string& path, const std::string& key, double fallback) {
  return j.contains(key) ? number(j, path, key) : fallback;
}

std::string text(const json& j, const std::string& path, const std::string& key) {
  const json& v = field(j, path, key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<std::pair<double, double>> pairs(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of [a, b] pairs");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      fail(path + "[" + std::to_string(i) + "]", "expected [number, number]");
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

json terrain_json(const terrain::TerrainParams& t) {
  // Radians on output so that a saved file reloads bit-for-bit.
  return json{{"friction_angle_rad", t.friction_angle},
              {"k_phi_si", t.k_phi},
              {"k_c_si", t.k_c},
              {"bekker_n", t.bekker_n},
              {"shear_coeff_K_m", t.shear_coeff_K},
              {"shear_cohesion_c_pa", t.shear_cohesion_c},
              {"damping_pa_s_per_m", t.damping},
              {"elastic_stiffness_pa_per_m", t.elastic_stiffness}};
}

terrain::TerrainParams terrain_from(const json& j, const std::string& path) {
  check_keys(j, path,
             {"model", "friction_angle_deg", "friction_angle_rad", "k_phi_si", "k_c_si", "bekker_n", "shear_coeff_K_m",
              "shear_cohesion_c_pa", "damping_pa_s_per_m", "elastic_stiffness_pa_per_m"});
  terrain::TerrainParams t;
  if (j.contains("friction_angle_deg") == j.contains("friction_angle_rad")) {
    fail(path + ".friction_angle_deg", "give exactly one of friction_angle_deg, friction_angle_rad");
  }
  t.friction_angle = j.contains("friction_angle_rad") ? number(j, path, "friction_angle_rad")
                                                       : number(j, path, "friction_angle_deg") / kDegPerRad;
  t.k_phi = number(j, path, "k_phi_si");
  t.k_c = number(j, path, "k_c_si");
  t.bekker_n = number(j, path, "bekker_n");
  t.shear_coeff_K = number(j, path, "shear_coeff_K_m");
  t.shear_cohesion_c = number_or(j, path, "shear_cohesion_c_pa", 0.0);
  t.damping = number(j, path, "damping_pa_s_per_m");
  t.elastic_stiffness = number_or(j, path, "elastic_stiffness_pa_per_m", 0.0);
  return t;
}

json vehicle_json(const terrain::VehicleParams& v) {
  return json{{"mass_kg", v.mass},
              {"wheel_count", v.wheel_count},
              {"tire_width_b_m", v.tire_width_b},
              {"patch_length_l_m", v.patch_length_l},
              {"max_accel_scale_mps2", v.max_accel_scale},
              {"wheelbase_L_m", v.wheelbase_L},
              {"cg_to_rear_Lr_m", v.cg_to_rear_Lr},
              {"settle_time_s", v.settle_time},
              {"damping_scale_chi", v.damping_scale_chi},
              {"assumed_slip_is", v.assumed_slip_is},
              {"steering_bound_rad", v.steering_bound}};
}

terrain::VehicleParams vehicle_from(const json& j, const std::string& path) {
  check_keys(j, path,
             {"mass_kg", "wheel_count", "tire_width_b_m", "patch_length_l_m", "max_accel_scale_mps2",
              "wheelbase_L_m", "cg_to_rear_Lr_m", "settle_time_s", "damping_scale_chi", "assumed_slip_is",
              "steering_bound_rad"});
  terrain::VehicleParams v;
  v.mass = number_or(j, path, "mass_kg", v.mass);
  if (j.contains("wheel_count")) {
    const double n = number(j, path, "wheel_count");
    if (n != std::floor(n)) fail(path + ".wheel_count", "expected an integer");
    v.wheel_count = static_cast<int>(n);
  }
  v.tire_width_b = number_or(j, path, "tire_width_b_m", v.tire_width_b);
  v.patch_length_l = number_or(j, path, "patch_length_l_m", v.patch_length_l);
  v.max_accel_scale = number_or(j, path, "max_accel_scale_mps2", v.max_accel_scale);
  v.wheelbase_L = number_or(j, path, "wheelbase_L_m", v.wheelbase_L);
  v.cg_to_rear_Lr = number_or(j, path, "cg_to_rear_Lr_m", v.cg_to_rear_Lr);
  v.settle_time = number_or(j, path, "settle_time_s", v.settle_time);
  v.damping_scale_chi = number_or(j, path, "damping_scale_chi", v.damping_scale_chi);
  v.assumed_slip_is = number_or(j, path, "assumed_slip_is", v.assumed_slip_is);
  v.steering_bound = number_or(j, path, "steering_bound_rad", v.steering_bound);
  return v;
}

}  // namespace

TableProfile sinusoidal_profile(double length, double mean, double amplitude, double wavelength, double spacing) {
  if (!(length > 0.0 && wavelength > 0.0 && spacing > 0.0)) {
    throw ValidationError("profile: length, wavelength and spacing must be > 0");
  }
  TableProfile p;
  const int n = static_cast<int>(std::ceil(length / spacing));
  for (int i = 0; i <= n; ++i) {
    const double s = i * spacing;
    p.knots.emplace_back(s, mean + amplitude * std::sin(2.0 * std::numbers::pi * s / wavelength));
  }
  return p;
}

void ScenarioSpec::validate() const {
  if (id.empty()) fail("scenario.id", "must not be empty");
  if (episode_steps < 1) fail("scenario.episode_steps", "must be >= 1");
  try {
    vehicle.validate();
    if (const auto* d = std::get_if<terrain::Deformable>(&plant)) d->terrain.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("scenario.") + e.what());
  }
  if (waypoints.size() < 2) fail("scenario.path.waypoints_m", "needs at least two points");
  for (const auto& w : waypoints)
    if (!w.allFinite()) fail("scenario.path.waypoints_m", "non-finite coordinate");
  if (const auto* c = std::get_if<ConstantProfile>(&profile)) {
    if (!(std::isfinite(c->speed) && c->speed >= 0.0)) fail("scenario.profile.speed_mps", "must be >= 0");
  } else {
    const auto& knots = std::get<TableProfile>(profile).knots;
    if (knots.empty()) fail("scenario.profile.table", "must not be empty");
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (!(std::isfinite(knots[i].first) && std::isfinite(knots[i].second) && knots[i].second >= 0.0)) {
        fail("scenario.profile.table[" + std::to_string(i) + "]", "needs finite s and speed >= 0");
      }
      if (i > 0 && !(knots[i].first > knots[i - 1].first)) {
        fail("scenario.profile.table[" + std::to_string(i) + "]", "arc lengths must increase");
      }
    }
  }
  if (controller.kind != ensemble::ControllerKind::Mpc && controller.checkpoint.empty()) {
    fail("scenario.controller.checkpoint", "required for " + ensemble::to_string(controller.kind));
  }
}

mpc::ReferencePath ScenarioSpec::path() const {
  std::vector<std::pair<double, double>> table;
  if (const auto* c = std::get_if<ConstantProfile>(&profile)) {
    table = {{0.0, c->speed}};
  } else {
    table = std::get<TableProfile>(profile).knots;
  }
  return mpc::ReferencePath(waypoints, table);
}

terrain::Plant ScenarioSpec::make_plant() const { return terrain::Plant(vehicle, plant); }

const std::vector<std::string>& builtin_scenario_ids() {
  static const std::vector<std::string> ids = {"1A", "1B", "2A", "2B", "3A", "3B", "C1"};
  return ids;
}

ScenarioSpec builtin_scenario(const std::string& id) {
  ScenarioSpec s;
  s.id = id;
  s.waypoints = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(kDefaultPathLength, 0.0)};
  if (id == "C1") {
    s.plant = terrain::Matched{};
    s.profile = ConstantProfile{};
    return s;
  }
  if (id.size() != 2 || id[0] < '1' || id[0] > '3' || (id[1] != 'A' && id[1] != 'B')) {
    throw ValidationError("scenario: unknown built-in id '" + id + "' (expected 1A..3B or C1)");
  }
  s.plant = terrain::Deformable{terrain::builtin_terrain(id[0] - '0')};
  if (id[1] == 'A') {
    s.profile = ConstantProfile{};
  } else {
    s.profile = sinusoidal_profile(kDefaultPathLength);
  }
  return s;
}

json to_json(const ScenarioSpec& spec) {
  json j;
  j["id"] = spec.id;
  if (const auto* d = std::get_if<terrain::Deformable>(&spec.plant)) {
    j["terrain"] = terrain_json(d->terrain);
    j["terrain"]["model"] = "deformable";
  } else {
    j["terrain"] = json{{"model", "matched"}};
  }
  j["vehicle"] = vehicle_json(spec.vehicle);
  json pts = json::array();
  for (const auto& w : spec.waypoints) pts.push_back({w.x(), w.y()});
  j["path"] = json{{"waypoints_m", pts}};
  if (const auto* c = std::get_if<ConstantProfile>(&spec.profile)) {
    j["profile"] = json{{"type", "constant"}, {"speed_mps", c->speed}};
  } else {
    json table = json::array();
    for (const auto& [s, v] : std::get<TableProfile>(spec.profile).knots) table.push_back({s, v});
    j["profile"] = json{{"type", "table"}, {"table_m_mps", table}};
  }
  j["episode_steps"] = spec.episode_steps;
  j["seed"] = spec.seed;
  j["controller"] = json{{"kind", ensemble::to_string(spec.controller.kind)}};
  if (!spec.controller.checkpoint.empty()) j["controller"]["checkpoint"] = spec.controller.checkpoint;
  return j;
}

ScenarioSpec scenario_from_json(const json& j) {
  const std::string root = "scenario";
  check_keys(j, root, {"id", "terrain", "vehicle", "path", "profile", "episode_steps", "seed", "controller"});
  ScenarioSpec s;
  s.id = text(j, root, "id");

  const json& t = field(j, root, "terrain");
  const std::string model = t.is_object() && t.contains("model") ? text(t, root + ".terrain", "model") : "deformable";
  if (model == "matched") {
    check_keys(t, root + ".terrain", {"model"});
    s.plant = terrain::Matched{};
  } else if (model == "deformable") {
    s.plant = terrain::Deformable{terrain_from(t, root + ".terrain")};
  } else {
    fail(root + ".terrain.model", "expected 'matched' or 'deformable'");
  }

  if (j.contains("vehicle")) s.vehicle = vehicle_from(j.at("vehicle"), root + ".vehicle");

  if (j.contains("path")) {
    const json& p = j.at("path");
    check_keys(p, root + ".path", {"waypoints_m"});
    for (const auto& [x, y] : pairs(field(p, root + ".path", "waypoints_m"), root + ".path.waypoints_m")) {
      s.waypoints.emplace_back(x, y);
    }
  } else {
    s.waypoints = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(kDefaultPathLength, 0.0)};
  }

  const json& pr = field(j, root, "profile");
  const std::string type = text(pr, root + ".profile", "type");
  if (type == "constant") {
    check_keys(pr, root + ".profile", {"type", "speed_mps"});
    s.profile = ConstantProfile{number(pr, root + ".profile", "speed_mps")};
  } else if (type == "table") {
    check_keys(pr, root + ".profile", {"type", "table_m_mps"});
    s.profile = TableProfile{pairs(field(pr, root + ".profile", "table_m_mps"), root + ".profile.table_m_mps")};
  } else if (type == "sinusoid") {
    check_keys(pr, root + ".profile", {"type", "mean_mps", "amplitude_mps", "wavelength_m"});
    double length = 0.0;
    for (std::size_t i = 1; i < s.waypoints.size(); ++i) length += (s.waypoints[i] - s.waypoints[i - 1]).norm();
    s.profile = sinusoidal_profile(length, number_or(pr, root + ".profile", "mean_mps", 8.0),
                                   number_or(pr, root + ".profile", "amplitude_mps", 4.0),
                                   number_or(pr, root + ".profile", "wavelength_m", 200.0));
  } else {
    fail(root + ".profile.type", "expected 'constant', 'table' or 'sinusoid'");
  }

  if (j.contains("episode_steps")) {
    const double n = number(j, root, "episode_steps");
    if (n != std::floor(n) || n < 1 || n > 1e7) fail(root + ".episode_steps", "must be an integer >= 1");
    s.episode_steps = static_cast<int>(n);
  }
  if (j.contains("seed")) {
    const json& v = j.at("seed");
    if (!v.is_number_unsigned()) fail(root + ".seed", "expected a non-negative integer");
    s.seed = v.get<std::uint64_t>();
  }
  if (j.contains("controller")) {
    const json& c = j.at("controller");
    check_keys(c, root + ".controller", {"kind", "checkpoint"});
    s.controller.kind = ensemble::parse_controller(text(c, root + ".controller", "kind"));
    if (c.contains("checkpoint")) s.controller.checkpoint = text(c, root + ".controller", "checkpoint");
  }
  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::string& id_or_path) {
  const auto& ids = builtin_scenario_ids();
  if (std::find(ids.begin(), ids.end(), id_or_path) != ids.end()) return builtin_scenario(id_or_path);
  std::ifstream in(id_or_path);
  if (!in) throw ValidationError("scenario: '" + id_or_path + "' is neither a built-in id nor a readable file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("scenario: parse error in '" + id_or_path + "': " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << to_json(spec).dump(2) << '\n';
}

}  // namespace ac2mpc::harness
