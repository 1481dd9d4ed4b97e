#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "imit2d/common.hpp"

namespace imit2d::dynamics {

// Drive limits of the wheelchair platform.
inline constexpr double kMaxLinearSpeed = 10.0;  // m/s
inline constexpr double kMaxYawRate = 20.0;      // rad/s
inline constexpr double kControlDt = 0.005;      // 200 Hz loop period

struct BallParams {
  double gravity{9.81};         // m/s^2
  double drag_coeff{0.02};      // k_d, 1/m; a_drag = -k_d * |v| * v
  double restitution{0.75};     // vertical speed ratio across a bounce
  double bounce_friction{0.2};  // horizontal speed loss fraction at bounce
};

struct BallState3 {
  Eigen::Vector3d pos{Eigen::Vector3d::Zero()};  // m, z up
  Eigen::Vector3d vel{Eigen::Vector3d::Zero()};  // m/s
  int bounce_count{0};
};

struct TimedBallState {
  double t{0.0};
  BallState3 state;
};

struct WheelchairState {
  double x{0.0};      // m
  double y{0.0};      // m
  double theta{0.0};  // rad, wrapped to (-pi, pi]
  double v{0.0};      // applied linear speed, m/s
  double omega{0.0};  // applied yaw rate, rad/s
};

double wrap_angle(double a);  // into (-pi, pi]

// RK4 flight step with ground-impact handling: the impact time is
// bisected to 1e-6 s, the vertical speed reverses scaled by restitution,
// the horizontal speed shrinks by the friction fraction, and the rest of
// the step continues. A ball resting on the ground stays put.
BallState3 step_ball(const BallState3& s, const BallParams& p, double dt);

// Samples at t = 0, dt, 2*dt, ..., floor(horizon/dt)*dt; first is `s`.
std::vector<TimedBallState> rollout_ball(const BallState3& s,
                                         const BallParams& p, double horizon,
                                         double dt);

// Unicycle integration of a commanded twist, clamped to the drive limits.
WheelchairState step_wheelchair(const WheelchairState& s, double v_cmd,
                                double omega_cmd, double dt);

// Differential-drive decomposition of a twist.
std::pair<double, double> twist_to_wheels(double v, double omega,
                                          double track_width);

}  // namespace imit2d::dynamics
