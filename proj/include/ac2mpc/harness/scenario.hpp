#ifndef AC2MPC_HARNESS_SCENARIO_HPP
#define AC2MPC_HARNESS_SCENARIO_HPP

#include "ac2mpc/ensemble/compensator.hpp"
#include "ac2mpc/terrain/plant.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace ac2mpc::harness {

inline constexpr double kDefaultPathLength = 500.0;   // m
inline constexpr double kConstantReference = 10.0;    // m/s
inline constexpr int kEpisodeSteps = 300;

struct ConstantProfile {
  double speed = kConstantReference;
  bool operator==(const ConstantProfile&) const = default;
};

/// (arc length, speed) knots, linearly interpolated.
struct TableProfile {
  std::vector<std::pair<double, double>> knots;
  bool operator==(const TableProfile&) const = default;
};

using VelocityProfile = std::variant<ConstantProfile, TableProfile>;

/// v(s) = mean + amplitude * sin(2 pi s / wavelength), tabulated every `spacing` metres.
TableProfile sinusoidal_profile(double length, double mean = 8.0, double amplitude = 4.0, double wavelength = 200.0,
                                double spacing = 2.0);

struct ControllerSpec {
  ensemble::ControllerKind kind = ensemble::ControllerKind::Mpc;
  std::string checkpoint;  // empty for the bare MPC
  bool operator==(const ControllerSpec&) const = default;
};

struct ScenarioSpec {
  std::string id;
  terrain::PlantMode plant = terrain::Matched{};
  terrain::VehicleParams vehicle;
  std::vector<Eigen::Vector2d> waypoints;
  VelocityProfile profile;
  int episode_steps = kEpisodeSteps;
  std::uint64_t seed = 0;
  ControllerSpec controller;

  /// Throws ValidationError with the offending field path.
  void validate() const;
  mpc::ReferencePath path() const;
  terrain::Plant make_plant() const;

  bool operator==(const ScenarioSpec&) const = default;
};

/// The six terrain scenarios 1A..3B and the matched-plant baseline C1.
const std::vector<std::string>& builtin_scenario_ids();
ScenarioSpec builtin_scenario(const std::string& id);

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

/// A built-in id or a path to a scenario file.
ScenarioSpec load_scenario(const std::string& id_or_path);
void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& file);

}  // namespace ac2mpc::harness

#endif  // AC2MPC_HARNESS_SCENARIO_HPP
