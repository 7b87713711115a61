#include "ac2mpc/terrain/terrain.hpp"

#include <cmath>
#include <stdexcept>

namespace ac2mpc::terrain {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ValidationError(std::string(field) + ": " + what);
}

constexpr double deg(double d) { return d * M_PI / 180.0; }

}  // namespace

void TerrainParams::validate() const {
  require(std::isfinite(k_phi) && k_phi > 0.0, "terrain.k_phi", "must be > 0");
  require(std::isfinite(bekker_n) && bekker_n > 0.0, "terrain.bekker_n", "must be > 0");
  require(std::isfinite(shear_coeff_K) && shear_coeff_K > 0.0, "terrain.shear_coeff_K", "must be > 0");
  require(friction_angle > 0.0 && friction_angle < M_PI / 2.0, "terrain.friction_angle",
          "must lie in (0, 90) degrees");
  require(std::isfinite(k_c) && k_c >= 0.0, "terrain.k_c", "must be >= 0");
  require(std::isfinite(shear_cohesion_c) && shear_cohesion_c >= 0.0, "terrain.shear_cohesion_c", "must be >= 0");
  require(std::isfinite(damping) && damping >= 0.0, "terrain.damping", "must be >= 0");
  require(std::isfinite(elastic_stiffness) && elastic_stiffness >= 0.0, "terrain.elastic_stiffness",
          "must be >= 0");
}

void VehicleParams::validate() const {
  require(std::isfinite(mass) && mass > 0.0, "vehicle.mass", "must be > 0");
  require(wheel_count >= 1, "vehicle.wheel_count", "must be >= 1");
  require(std::isfinite(tire_width_b) && tire_width_b > 0.0, "vehicle.tire_width_b", "must be > 0");
  require(std::isfinite(patch_length_l) && patch_length_l > 0.0, "vehicle.patch_length_l", "must be > 0");
  require(assumed_slip_is > 0.0 && assumed_slip_is <= 1.0, "vehicle.assumed_slip_is", "must lie in (0, 1]");
  require(std::isfinite(settle_time) && settle_time >= 0.0, "vehicle.settle_time", "must be >= 0");
  require(std::isfinite(max_accel_scale) && max_accel_scale > 0.0, "vehicle.max_accel_scale", "must be > 0");
  require(std::isfinite(wheelbase_L) && wheelbase_L > 0.0, "vehicle.wheelbase_L", "must be > 0");
  require(cg_to_rear_Lr > 0.0 && cg_to_rear_Lr <= wheelbase_L, "vehicle.cg_to_rear_Lr",
          "must lie in (0, wheelbase_L]");
  require(std::isfinite(damping_scale_chi) && damping_scale_chi >= 0.0, "vehicle.damping_scale_chi",
          "must be >= 0");
  require(steering_bound > 0.0 && steering_bound < M_PI / 2.0, "vehicle.steering_bound",
          "must lie in (0, pi/2)");
}

double VehicleParams::contact_pressure() const {
  return (mass * kGravity / wheel_count) / (tire_width_b * patch_length_l);
}

TerrainParams builtin_terrain(int terrain_id) {
  switch (terrain_id) {
    case 1:  // loose sand
      return {deg(30.0), 2e6, 0.0, 2e8, 0.01, 1.1, 3e4, 0.0};
    case 2:  // sand over rock
      return {deg(20.0), 1e6, 1e2, 3e8, 0.005, 1.0, 3e4, 3000.0};
    case 3:  // soft clay
      return {deg(14.0), 5e5, 1e5, 2e7, 0.02, 0.7, 5e4, 30000.0};
    default:
      throw ValidationError("terrain id must be 1, 2 or 3, got " + std::to_string(terrain_id));
  }
}

double bekker_pressure(const TerrainParams& terrain, double b, double sinkage_y) {
  if (!(b > 0.0)) throw std::domain_error("bekker_pressure: contact width must be positive");
  if (!(sinkage_y >= 0.0)) throw std::domain_error("bekker_pressure: sinkage must be non-negative");
  return (terrain.k_c / b + terrain.k_phi) * std::pow(sinkage_y, terrain.bekker_n);
}

double static_sinkage(const TerrainParams& terrain, const VehicleParams& vehicle) {
  const double modulus = terrain.k_c / vehicle.tire_width_b + terrain.k_phi;
  return std::pow(vehicle.contact_pressure() / modulus, 1.0 / terrain.bekker_n);
}

double compaction_resistance(const TerrainParams& terrain, const VehicleParams& vehicle, double sinkage_y) {
  if (!(sinkage_y >= 0.0)) throw std::domain_error("compaction_resistance: sinkage must be non-negative");
  const double b = vehicle.tire_width_b;
  const double n = terrain.bekker_n;
  const double per_wheel = b * (terrain.k_c / b + terrain.k_phi) * std::pow(sinkage_y, n + 1.0) / (n + 1.0);
  return vehicle.wheel_count * per_wheel;
}

double janosi_efficiency(const TerrainParams& terrain, const VehicleParams& vehicle) {
  const double shear_run = vehicle.assumed_slip_is * vehicle.patch_length_l / terrain.shear_coeff_K;
  // 1 - (1 - e^{-x}) / x, written with expm1 so that tiny K does not cancel.
  return 1.0 + std::expm1(-shear_run) / shear_run;
}

double traction_limit(const TerrainParams& terrain, const VehicleParams& vehicle) {
  const double shear_strength =
      terrain.shear_cohesion_c + vehicle.contact_pressure() * std::tan(terrain.friction_angle);
  return janosi_efficiency(terrain, vehicle) * vehicle.contact_area() * shear_strength;
}

}  // namespace ac2mpc::terrain
