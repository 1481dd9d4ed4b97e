#include "imit2d/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace imit2d::dynamics {
namespace {

constexpr double kImpactTimeTol = 1e-6;   // s
constexpr double kGroundTol = 1e-9;       // m
constexpr double kRestSpeedTol = 1e-4;    // m/s, below this a bounce dies out

struct FlightState {
  Eigen::Vector3d pos;
  Eigen::Vector3d vel;
};

Eigen::Vector3d accel(const Eigen::Vector3d& vel, const BallParams& p) {
  return Eigen::Vector3d(0.0, 0.0, -p.gravity) - p.drag_coeff * vel.norm() * vel;
}

FlightState rk4_flight(const FlightState& s, const BallParams& p, double h) {
  const Eigen::Vector3d k1p = s.vel;
  const Eigen::Vector3d k1v = accel(s.vel, p);
  const Eigen::Vector3d k2p = s.vel + 0.5 * h * k1v;
  const Eigen::Vector3d k2v = accel(s.vel + 0.5 * h * k1v, p);
  const Eigen::Vector3d k3p = s.vel + 0.5 * h * k2v;
  const Eigen::Vector3d k3v = accel(s.vel + 0.5 * h * k2v, p);
  const Eigen::Vector3d k4p = s.vel + h * k3v;
  const Eigen::Vector3d k4v = accel(s.vel + h * k3v, p);
  return {s.pos + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
          s.vel + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

// Planar motion of a grounded ball: z pinned to 0, drag still acts.
FlightState rk4_rolling(const FlightState& s, const BallParams& p, double h) {
  FlightState flat = s;
  flat.pos.z() = 0.0;
  flat.vel.z() = 0.0;
  FlightState out = rk4_flight(flat, p, h);
  out.pos.z() = 0.0;
  out.vel.z() = 0.0;
  return out;
}

bool resting(const FlightState& s) {
  return s.pos.z() <= kGroundTol && std::abs(s.vel.z()) <= kRestSpeedTol;
}

}  // namespace

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

BallState3 step_ball(const BallState3& s, const BallParams& p, double dt) {
  FlightState cur{s.pos, s.vel};
  int bounces = s.bounce_count;
  double remaining = dt;

  for (int guard = 0; guard < 16 && remaining > 0.0; ++guard) {
    if (resting(cur)) {
      cur = rk4_rolling(cur, p, remaining);
      remaining = 0.0;
      break;
    }

    // Contact at the start of the step with downward motion.
    if (cur.pos.z() <= kGroundTol && cur.vel.z() < 0.0) {
      const double vz_in = cur.vel.z();
      cur.pos.z() = 0.0;
      if (std::abs(vz_in) < kRestSpeedTol) {
        cur.vel.z() = 0.0;  // bounce has died out; settle
        continue;
      }
      cur.vel.z() = -p.restitution * vz_in;
      cur.vel.x() *= 1.0 - p.bounce_friction;
      cur.vel.y() *= 1.0 - p.bounce_friction;
      ++bounces;
      continue;
    }

    FlightState trial = rk4_flight(cur, p, remaining);
    if (trial.pos.z() >= 0.0) {
      cur = trial;
      remaining = 0.0;
      break;
    }

    // Bisect the impact time inside (0, remaining].
    double lo = 0.0, hi = remaining;
    while (hi - lo > kImpactTimeTol) {
      const double mid = 0.5 * (lo + hi);
      if (rk4_flight(cur, p, mid).pos.z() >= 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    FlightState at_impact = rk4_flight(cur, p, hi);
    at_impact.pos.z() = 0.0;
    if (at_impact.vel.z() > 0.0) at_impact.vel.z() = 0.0;
    cur = at_impact;
    remaining -= hi;
  }

  BallState3 out;
  out.pos = cur.pos;
  out.vel = cur.vel;
  if (out.pos.z() < 0.0) out.pos.z() = 0.0;
  out.bounce_count = bounces;
  return out;
}

std::vector<TimedBallState> rollout_ball(const BallState3& s,
                                         const BallParams& p, double horizon,
                                         double dt) {
  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  std::vector<TimedBallState> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back({0.0, s});
  BallState3 cur = s;
  for (int i = 1; i <= steps; ++i) {
    cur = step_ball(cur, p, dt);
    out.push_back({i * dt, cur});
  }
  return out;
}

WheelchairState step_wheelchair(const WheelchairState& s, double v_cmd,
                                double omega_cmd, double dt) {
  const double v = std::clamp(v_cmd, -kMaxLinearSpeed, kMaxLinearSpeed);
  const double omega = std::clamp(omega_cmd, -kMaxYawRate, kMaxYawRate);
  WheelchairState out;
  out.x = s.x + v * std::cos(s.theta) * dt;
  out.y = s.y + v * std::sin(s.theta) * dt;
  out.theta = wrap_angle(s.theta + omega * dt);
  out.v = v;
  out.omega = omega;
  return out;
}

std::pair<double, double> twist_to_wheels(double v, double omega,
                                          double track_width) {
  return {v - omega * track_width / 2.0, v + omega * track_width / 2.0};
}

}  // namespace imit2d::dynamics
