#include "ac2mpc/terrain/plant.hpp"

#include <algorithm>
#include <cmath>

namespace ac2mpc::terrain {

Plant::Plant(VehicleParams vehicle, PlantMode mode) : vehicle_(vehicle), mode_(std::move(mode)) {
  vehicle_.validate();
  if (const auto* soil = std::get_if<Deformable>(&mode_)) {
    soil->terrain.validate();
    sinkage_ = static_sinkage(soil->terrain, vehicle_);
    compaction_ = compaction_resistance(soil->terrain, vehicle_, sinkage_);
    traction_max_ = traction_limit(soil->terrain, vehicle_);
    viscous_coeff_ = vehicle_.damping_scale_chi * soil->terrain.damping * vehicle_.contact_area();
  }
}

BicycleGeometry Plant::geometry() const {
  return {vehicle_.wheelbase_L, vehicle_.cg_to_rear_Lr, vehicle_.max_accel_scale};
}

LongitudinalForces Plant::forces(double speed, double throttle, double time) const {
  LongitudinalForces f;
  f.commanded = vehicle_.mass * vehicle_.max_accel_scale * throttle;
  const bool moving = speed > 0.0;

  if (!deformable()) {
    f.traction = f.commanded;
    f.net = (moving || f.traction > 0.0) ? f.traction : 0.0;
    return f;
  }

  const double ramp = vehicle_.settle_time > 0.0 ? std::min(1.0, time / vehicle_.settle_time) : 1.0;
  f.traction = ramp * std::clamp(f.commanded, -traction_max_, traction_max_);
  if (moving) {
    f.compaction = compaction_;
    f.viscous = viscous_coeff_ * speed;
    f.net = f.traction - f.compaction - f.viscous;
  } else if (f.traction > compaction_) {
    f.compaction = compaction_;
    f.net = f.traction - compaction_;
  } else {
    // Static: resistance reacts exactly as much as the drive, never reversing.
    f.compaction = std::max(0.0, f.traction);
    f.net = 0.0;
  }
  return f;
}

VehicleState Plant::step(const VehicleState& state, const ControlInput& input, double dt) const {
  if (!state.finite() || !std::isfinite(input.throttle_a) || !std::isfinite(input.steer_rate_omega) ||
      !std::isfinite(dt)) {
    throw PlantFault("plant step: non-finite state or input");
  }
  const BicycleGeometry geom = geometry();
  const double mass = vehicle_.mass;
  auto rhs = [&](double t, const StateVector& x) {
    const double v = std::max(0.0, x[kV]);
    StateVector xs = x;
    xs[kV] = v;
    const double accel = forces(v, input.throttle_a, t).net / mass;
    return bicycle_rates(xs, input.steer_rate_omega, accel, geom);
  };
  StateVector next = rk4_step<double>(rhs, state.vector(), state.sim_time, dt);
  next[kV] = std::max(0.0, next[kV]);
  next[kTheta] = std::clamp(next[kTheta], -vehicle_.steering_bound, vehicle_.steering_bound);
  VehicleState out = VehicleState::from_vector(next, state.sim_time + dt);
  if (!out.finite()) throw PlantFault("plant step: state became non-finite");
  return out;
}

VehicleState Plant::run_with_zoh(const VehicleState& state, const ControlInput& input, int substeps,
                                 double dt) const {
  if (substeps < 1) throw ValidationError("run_with_zoh: substeps must be >= 1");
  VehicleState s = state;
  for (int i = 0; i < substeps; ++i) s = step(s, input, dt);
  return s;
}

VehicleState step(const VehicleState& state, const ControlInput& input, const VehicleParams& vehicle,
                  const PlantMode& mode, double dt) {
  return Plant(vehicle, mode).step(state, input, dt);
}

VehicleState run_with_zoh(const VehicleState& state, const ControlInput& input, const VehicleParams& vehicle,
                          const PlantMode& mode, int substeps, double dt) {
  return Plant(vehicle, mode).run_with_zoh(state, input, substeps, dt);
}

}  // namespace ac2mpc::terrain
