#ifndef AC2MPC_TERRAIN_TERRAIN_HPP
#define AC2MPC_TERRAIN_TERRAIN_HPP

#include "ac2mpc/types.hpp"

#include <string>

namespace ac2mpc::terrain {

/// Bekker-Wong / Mohr-Coulomb soil constants. Moduli are in Bekker units
/// consistent with sigma = (k_c / b + k_phi) * y^n.
struct TerrainParams {
  double friction_angle = 0.0;     // rad
  double k_phi = 0.0;              // soil stiffness modulus
  double k_c = 0.0;                // cohesive modulus
  double elastic_stiffness = 0.0;  // Pa/m, carried but not used by the quasi-static force balance
  double shear_coeff_K = 0.0;      // m
  double bekker_n = 1.0;
  double damping = 0.0;            // Pa s/m
  double shear_cohesion_c = 0.0;   // Pa

  /// Throws ValidationError naming the offending field.
  void validate() const;

  bool operator==(const TerrainParams&) const = default;
};

struct VehicleParams {
  double mass = 2500.0;
  int wheel_count = 4;
  double tire_width_b = 0.3;
  double patch_length_l = 0.25;
  double max_accel_scale = 5.0;
  double wheelbase_L = 2.75;
  double cg_to_rear_Lr = 1.75;
  double settle_time = 1.5;
  double damping_scale_chi = 0.04;
  double assumed_slip_is = 0.2;
  double steering_bound = kSteeringBound;

  void validate() const;

  /// Total contact area over all wheels.
  double contact_area() const { return wheel_count * tire_width_b * patch_length_l; }
  /// Quasi-static contact pressure under one wheel.
  double contact_pressure() const;

  bool operator==(const VehicleParams&) const = default;
};

/// Built-in soil sets for terrain ids 1, 2, 3.
TerrainParams builtin_terrain(int terrain_id);

/// sigma = (k_c / b + k_phi) * y^n.
double bekker_pressure(const TerrainParams& terrain, double b, double sinkage_y);

/// Sinkage at which the Bekker pressure carries the per-wheel static load.
double static_sinkage(const TerrainParams& terrain, const VehicleParams& vehicle);

/// Compaction drag summed over all wheels: work of pressing the soil down to `sinkage_y`.
double compaction_resistance(const TerrainParams& terrain, const VehicleParams& vehicle, double sinkage_y);

/// Janosi shear efficiency at the vehicle's assumed constant slip.
double janosi_efficiency(const TerrainParams& terrain, const VehicleParams& vehicle);

/// Mohr-Coulomb traction bound scaled by the Janosi efficiency.
double traction_limit(const TerrainParams& terrain, const VehicleParams& vehicle);

}  // namespace ac2mpc::terrain

#endif  // AC2MPC_TERRAIN_TERRAIN_HPP
