#ifndef AC2MPC_MPC_REFERENCE_PATH_HPP
#define AC2MPC_MPC_REFERENCE_PATH_HPP

#include "ac2mpc/types.hpp"

#include <utility>
#include <vector>

namespace ac2mpc::mpc {

struct MpcConfig;

/// Polyline with arc-length parameterization and a position-indexed speed profile.
class ReferencePath {
 public:
  ReferencePath() = default;

  /// `speed_table` holds (arc length, speed) knots, linearly interpolated and
  /// held constant beyond the ends.
  ReferencePath(std::vector<Eigen::Vector2d> waypoints, std::vector<std::pair<double, double>> speed_table);

  static ReferencePath straight(double length, double speed);

  const std::vector<Eigen::Vector2d>& waypoints() const { return points_; }
  const std::vector<double>& arc_lengths() const { return arc_; }
  const std::vector<std::pair<double, double>>& speed_table() const { return speeds_; }

  double length() const { return arc_.empty() ? 0.0 : arc_.back(); }
  Eigen::Vector2d point_at(double s) const;
  double heading_at(double s) const;
  double speed_at(double s) const;

  bool operator==(const ReferencePath& other) const {
    return points_ == other.points_ && speeds_ == other.speeds_;
  }

 private:
  std::size_t segment_at(double s) const;

  std::vector<Eigen::Vector2d> points_;
  std::vector<double> arc_;
  std::vector<std::pair<double, double>> speeds_;
};

struct PathProjection {
  double arc_length = 0.0;
  double distance = 0.0;
  /// Positive when the position lies to the left of the path direction.
  double signed_offset = 0.0;
};

/// Closest point on the polyline; among equal distances the smallest arc length wins.
PathProjection project_to_path(const ReferencePath& path, const Eigen::Vector2d& position);

struct References {
  std::vector<StateVector> states;  // rho_0 .. rho_N
  std::vector<InputVector> inputs;  // mu_0 .. mu_{N-1}
  std::vector<double> arc_lengths;  // s_0 .. s_N
};

/// Horizon references regenerated from the current position only.
References generate_references(const ReferencePath& path, const VehicleState& state, int stages, double dt);
References generate_references(const ReferencePath& path, const VehicleState& state, const MpcConfig& config);

}  // namespace ac2mpc::mpc

#endif  // AC2MPC_MPC_REFERENCE_PATH_HPP
