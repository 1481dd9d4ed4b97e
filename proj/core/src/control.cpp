#include "imit2d/control.hpp"

#include <algorithm>
#include <cmath>

namespace imit2d::control {
namespace {

struct ErrorTerms {
  double forward;   // target x in the robot frame
  double distance;  // Euclidean gap
  double bearing;   // wrapped angle toward the target
};

ErrorTerms error_terms(const dynamics::WheelchairState& pose,
                       const geometry::CourtPoint& target) {
  const double dx = target.x - pose.x;
  const double dy = target.y - pose.y;
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const double xr = c * dx + s * dy;
  const double yr = -s * dx + c * dy;
  const double dist = std::hypot(xr, yr);
  const double bearing = dist < 1e-12 ? 0.0 : dynamics::wrap_angle(std::atan2(yr, xr));
  return {xr, dist, bearing};
}

}  // namespace

PdCommand pd_step(const dynamics::WheelchairState& pose,
                  const geometry::CourtPoint& target, const PDGains& gains,
                  double d_dot, double theta_dot, const PdOptions& options) {
  const ErrorTerms err = error_terms(pose, target);

  double v = gains.k1p * err.forward + gains.k1d * d_dot;
  if (options.turn_then_drive && std::abs(err.bearing) > M_PI / 2.0) {
    v *= std::max(0.0, std::cos(err.bearing));
  }
  const double omega = gains.k2p * err.bearing + gains.k2d * theta_dot;

  return {std::clamp(v, -dynamics::kMaxLinearSpeed, dynamics::kMaxLinearSpeed),
          std::clamp(omega, -dynamics::kMaxYawRate, dynamics::kMaxYawRate)};
}

PdCommand WaypointTracker::command(const LocalPlan& plan,
                                   const dynamics::WheelchairState& state,
                                   double t) {
  if (plan.waypoints.empty()) return {0.0, 0.0};
  if (plan.created_at != plan_created_) {
    plan_created_ = plan.created_at;
    min_index_ = 0;
  }

  const double elapsed = std::max(0.0, t - plan.created_at);
  std::size_t index =
      static_cast<std::size_t>(std::floor(elapsed / plan.waypoint_spacing)) + 1;
  index = std::min(index, plan.waypoints.size() - 1);
  index = std::max(index, min_index_);
  min_index_ = index;

  const geometry::CourtPoint& target = plan.waypoints[index];
  const ErrorTerms err = error_terms(state, target);

  double d_dot = 0.0, theta_dot = 0.0;
  if (has_prev_ && t > prev_t_) {
    d_dot = (err.distance - prev_dist_err_) / (t - prev_t_);
    theta_dot = dynamics::wrap_angle(err.bearing - prev_ang_err_) / (t - prev_t_);
  }
  has_prev_ = true;
  prev_t_ = t;
  prev_dist_err_ = err.distance;
  prev_ang_err_ = err.bearing;

  return pd_step(state, target, gains_, d_dot, theta_dot, options_);
}

void WaypointTracker::reset() {
  has_prev_ = false;
  plan_created_ = -1.0;
  min_index_ = 0;
}

}  // namespace imit2d::control
