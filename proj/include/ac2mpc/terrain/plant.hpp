#ifndef AC2MPC_TERRAIN_PLANT_HPP
#define AC2MPC_TERRAIN_PLANT_HPP

#include "ac2mpc/kinematics.hpp"
#include "ac2mpc/terrain/terrain.hpp"

#include <variant>

namespace ac2mpc::terrain {

/// Pure kinematic bicycle: the plant equals the prediction model.
struct Matched {
  bool operator==(const Matched&) const = default;
};

struct Deformable {
  TerrainParams terrain;
  bool operator==(const Deformable&) const = default;
};

using PlantMode = std::variant<Matched, Deformable>;

inline constexpr double kSimTimeStep = 3e-3;
inline constexpr int kSubstepsPerControl = 33;

/// Longitudinal force terms at one instant, all in newtons.
struct LongitudinalForces {
  double commanded = 0.0;   // mass * scale * throttle
  double traction = 0.0;    // after the traction clamp and settle ramp
  double compaction = 0.0;  // opposing motion, zero at rest unless overcome
  double viscous = 0.0;
  double net = 0.0;
};

/// The terrain-coupled plant. Sinkage, compaction drag and traction bound are
/// quasi-static, so they are computed once per (vehicle, mode) pair.
class Plant {
 public:
  Plant(VehicleParams vehicle, PlantMode mode);

  const VehicleParams& vehicle() const { return vehicle_; }
  const PlantMode& mode() const { return mode_; }
  BicycleGeometry geometry() const;

  bool deformable() const { return std::holds_alternative<Deformable>(mode_); }
  double sinkage() const { return sinkage_; }
  double traction_bound() const { return traction_max_; }
  double compaction_drag() const { return compaction_; }

  LongitudinalForces forces(double speed, double throttle, double time) const;

  /// One integration step of length dt with the input held constant.
  VehicleState step(const VehicleState& state, const ControlInput& input, double dt = kSimTimeStep) const;

  /// `substeps` consecutive steps under a zero-order-held input.
  VehicleState run_with_zoh(const VehicleState& state, const ControlInput& input,
                            int substeps = kSubstepsPerControl, double dt = kSimTimeStep) const;

 private:
  VehicleParams vehicle_;
  PlantMode mode_;
  double sinkage_ = 0.0;
  double compaction_ = 0.0;
  double traction_max_ = 0.0;
  double viscous_coeff_ = 0.0;
};

/// Free-function forms mirroring the Plant members.
VehicleState step(const VehicleState& state, const ControlInput& input, const VehicleParams& vehicle,
                  const PlantMode& mode, double dt = kSimTimeStep);
VehicleState run_with_zoh(const VehicleState& state, const ControlInput& input, const VehicleParams& vehicle,
                          const PlantMode& mode, int substeps = kSubstepsPerControl, double dt = kSimTimeStep);

}  // namespace ac2mpc::terrain

#endif  // AC2MPC_TERRAIN_PLANT_HPP
