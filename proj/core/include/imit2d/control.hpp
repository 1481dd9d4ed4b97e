#pragma once

#include <vector>

#include "imit2d/dynamics.hpp"
#include "imit2d/geometry.hpp"

namespace imit2d::control {

struct PDGains {
  double k1p{1.5};
  double k1d{0.2};
  double k2p{4.0};
  double k2d{0.3};
};

struct PdOptions {
  // Scale the drive term by max(0, cos(angular error)) when the target is
  // more than 90 degrees off heading, so the platform turns before driving.
  bool turn_then_drive{true};
};

struct PdCommand {
  double v{0.0};      // m/s
  double omega{0.0};  // rad/s
};

// One PD evaluation: the target is expressed in the robot frame, the
// drive speed follows the forward projection of the position error and
// the yaw rate follows the wrapped bearing error. d_dot and theta_dot are
// the rates of those two error terms. Output clamped to the drive limits.
PdCommand pd_step(const dynamics::WheelchairState& pose,
                  const geometry::CourtPoint& target, const PDGains& gains,
                  double d_dot, double theta_dot, const PdOptions& options = {});

struct LocalPlan {
  std::vector<geometry::CourtPoint> waypoints;
  double created_at{0.0};          // s
  double waypoint_spacing{1.0 / 30.0};  // s between consecutive waypoints
  double replan_period{0.2};       // s
};

// Tracks a timed waypoint plan: the active waypoint advances with elapsed
// time (one ahead of the interpolation clock, monotonically), and the PD
// derivative terms come from backward differences of the error terms.
class WaypointTracker {
 public:
  explicit WaypointTracker(const PDGains& gains, const PdOptions& options = {})
      : gains_(gains), options_(options) {}

  PdCommand command(const LocalPlan& plan, const dynamics::WheelchairState& state,
                    double t);
  void reset();

 private:
  PDGains gains_;
  PdOptions options_;
  bool has_prev_{false};
  double prev_t_{0.0};
  double prev_dist_err_{0.0};
  double prev_ang_err_{0.0};
  double plan_created_{-1.0};
  std::size_t min_index_{0};
};

}  // namespace imit2d::control
