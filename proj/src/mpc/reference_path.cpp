#include "ac2mpc/mpc/reference_path.hpp"

#include "ac2mpc/mpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ac2mpc::mpc {

ReferencePath::ReferencePath(std::vector<Eigen::Vector2d> waypoints,
                             std::vector<std::pair<double, double>> speed_table)
    : points_(std::move(waypoints)), speeds_(std::move(speed_table)) {
  if (points_.size() < 2) throw ValidationError("path.waypoints: need at least two points");
  arc_.reserve(points_.size());
  arc_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double len = (points_[i] - points_[i - 1]).norm();
    if (!(len > 0.0)) throw ValidationError("path.waypoints: arc length must be strictly increasing");
    arc_.push_back(arc_.back() + len);
  }
  if (speeds_.empty()) throw ValidationError("path.speed_table: must not be empty");
  for (std::size_t i = 0; i < speeds_.size(); ++i) {
    if (!(speeds_[i].second >= 0.0)) throw ValidationError("path.speed_table: speeds must be >= 0");
    if (i > 0 && !(speeds_[i].first > speeds_[i - 1].first)) {
      throw ValidationError("path.speed_table: arc lengths must be strictly increasing");
    }
  }
}

ReferencePath ReferencePath::straight(double length, double speed) {
  return ReferencePath({Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(length, 0.0)}, {{0.0, speed}});
}

std::size_t ReferencePath::segment_at(double s) const {
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - arc_.begin()));
  return std::min(idx, arc_.size() - 1) - 1;
}

Eigen::Vector2d ReferencePath::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = segment_at(s);
  const double t = (s - arc_[i]) / (arc_[i + 1] - arc_[i]);
  return points_[i] + t * (points_[i + 1] - points_[i]);
}

double ReferencePath::heading_at(double s) const {
  const std::size_t i = segment_at(std::clamp(s, 0.0, length()));
  const Eigen::Vector2d d = points_[i + 1] - points_[i];
  return std::atan2(d.y(), d.x());
}

double ReferencePath::speed_at(double s) const {
  if (s <= speeds_.front().first) return speeds_.front().second;
  if (s >= speeds_.back().first) return speeds_.back().second;
  const auto it = std::upper_bound(speeds_.begin(), speeds_.end(), s,
                                   [](double value, const auto& knot) { return value < knot.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double t = (s - lo.first) / (hi.first - lo.first);
  return lo.second + t * (hi.second - lo.second);
}

PathProjection project_to_path(const ReferencePath& path, const Eigen::Vector2d& position) {
  const auto& pts = path.waypoints();
  const auto& arc = path.arc_lengths();
  PathProjection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Eigen::Vector2d seg = pts[i + 1] - pts[i];
    const double len2 = seg.squaredNorm();
    const double t = std::clamp((position - pts[i]).dot(seg) / len2, 0.0, 1.0);
    const Eigen::Vector2d foot = pts[i] + t * seg;
    const double d2 = (position - foot).squaredNorm();
    // Strict comparison keeps the earliest (smallest arc length) minimizer.
    if (d2 < best_d2) {
      best_d2 = d2;
      best.arc_length = arc[i] + t * std::sqrt(len2);
      const Eigen::Vector2d rel = position - foot;
      const double cross = seg.x() * rel.y() - seg.y() * rel.x();
      best.distance = std::sqrt(d2);
      best.signed_offset = cross >= 0.0 ? best.distance : -best.distance;
    }
  }
  return best;
}

References generate_references(const ReferencePath& path, const VehicleState& state, int stages, double dt) {
  References refs;
  refs.states.reserve(stages + 1);
  refs.inputs.assign(stages, InputVector::Zero());
  double s = project_to_path(path, Eigen::Vector2d(state.s_x, state.s_y)).arc_length;
  for (int k = 0; k <= stages; ++k) {
    const Eigen::Vector2d p = path.point_at(s);
    const double speed = path.speed_at(s);
    StateVector rho;
    rho << p.x(), p.y(), path.heading_at(s), 0.0, speed;
    refs.states.push_back(rho);
    refs.arc_lengths.push_back(s);
    s = std::min(path.length(), s + speed * dt);
  }
  return refs;
}

References generate_references(const ReferencePath& path, const VehicleState& state, const MpcConfig& config) {
  return generate_references(path, state, config.stages_N, config.stage_dt());
}

}  // namespace ac2mpc::mpc
