#include <doctest.h>

#include <cmath>
#include <random>

#include "imit2d/control.hpp"

using namespace imit2d;
using namespace imit2d::control;
using imit2d::dynamics::WheelchairState;
using imit2d::geometry::CourtPoint;

TEST_SUITE_BEGIN("control");

TEST_CASE("pd formula basics") {
  WheelchairState pose;  // origin, heading +x
  PDGains gains;
  gains.k1p = 2.0;
  gains.k2p = 1.0;

  const PdCommand ahead = pd_step(pose, {1.0, 0.0}, gains, 0.0, 0.0);
  CHECK(ahead.v == doctest::Approx(2.0));
  CHECK(ahead.omega == doctest::Approx(0.0));

  const PdCommand left = pd_step(pose, {0.0, 1.0}, gains, 0.0, 0.0);
  CHECK(left.v == doctest::Approx(0.0));
  CHECK(left.omega == doctest::Approx(M_PI / 2.0));
}

TEST_CASE("target behind follows the raw formula when turn-then-drive is off") {
  WheelchairState pose;
  PDGains gains;
  gains.k1p = 1.5;
  gains.k2p = 1.0;
  PdOptions raw;
  raw.turn_then_drive = false;

  const PdCommand cmd = pd_step(pose, {-1.0, 0.0}, gains, 0.0, 0.0, raw);
  CHECK(cmd.v == doctest::Approx(-gains.k1p));
  CHECK(cmd.omega == doctest::Approx(gains.k2p * M_PI));

  // Quadrant sweep against the formula, raw mode.
  for (const auto& [tx, ty] : std::vector<std::pair<double, double>>{
           {1, 1}, {-1, 1}, {-1, -1}, {1, -1}, {0.5, -2}}) {
    const PdCommand c = pd_step(pose, {tx, ty}, gains, 0.0, 0.0, raw);
    CHECK(c.v == doctest::Approx(gains.k1p * tx));
    CHECK(c.omega == doctest::Approx(gains.k2p * std::atan2(ty, tx)));
  }

  // Default mode gates the drive term on large bearing errors.
  const PdCommand gated = pd_step(pose, {-1.0, 0.0}, gains, 0.0, 0.0);
  CHECK(gated.v == doctest::Approx(0.0));
}

TEST_CASE("zero error and zero derivatives give exactly zero commands") {
  WheelchairState pose;
  pose.x = 3.0;
  pose.y = -1.0;
  pose.theta = 0.7;
  const PdCommand cmd = pd_step(pose, {3.0, -1.0}, PDGains{}, 0.0, 0.0);
  CHECK(std::abs(cmd.v) < 1e-9);
  CHECK(std::abs(cmd.omega) < 1e-9);
}

TEST_CASE("commands respect the drive limits") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 500; ++i) {
    WheelchairState pose;
    pose.x = u(rng);
    pose.y = u(rng);
    pose.theta = u(rng) / 10.0;
    const PdCommand cmd =
        pd_step(pose, {u(rng), u(rng)}, PDGains{}, u(rng), u(rng));
    CHECK(std::abs(cmd.v) <= 10.0);
    CHECK(std::abs(cmd.omega) <= 20.0);
  }
}

TEST_CASE("pd_step is SE(2) equivariant") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    WheelchairState pose;
    pose.x = u(rng);
    pose.y = u(rng);
    pose.theta = 0.4 * u(rng);
    const CourtPoint target{u(rng), u(rng)};
    const double dd = 0.3 * u(rng), td = 0.1 * u(rng);
    const PdCommand base = pd_step(pose, target, PDGains{}, dd, td);

    const double phi = 0.5 * u(rng);
    const double tx = u(rng), ty = u(rng);
    WheelchairState moved;
    moved.x = std::cos(phi) * pose.x - std::sin(phi) * pose.y + tx;
    moved.y = std::sin(phi) * pose.x + std::cos(phi) * pose.y + ty;
    moved.theta = dynamics::wrap_angle(pose.theta + phi);
    const CourtPoint moved_target{
        std::cos(phi) * target.x - std::sin(phi) * target.y + tx,
        std::sin(phi) * target.x + std::cos(phi) * target.y + ty};
    const PdCommand same = pd_step(moved, moved_target, PDGains{}, dd, td);
    CHECK(std::abs(same.v - base.v) < 1e-9);
    CHECK(std::abs(same.omega - base.omega) < 1e-9);
  }
}

TEST_CASE("tracker returns zero on the final waypoint at rest") {
  LocalPlan plan;
  plan.waypoints = {{2.0, 1.0}};
  plan.created_at = 0.0;
  WheelchairState pose;
  pose.x = 2.0;
  pose.y = 1.0;
  WaypointTracker tracker{PDGains{}};
  const PdCommand cmd = tracker.command(plan, pose, 0.0);
  CHECK(std::abs(cmd.v) < 1e-9);
  CHECK(std::abs(cmd.omega) < 1e-9);
}

TEST_CASE("closed loop converges to a static goal within five seconds") {
  LocalPlan plan;
  plan.waypoints = {{5.0, 0.0}};
  plan.created_at = 0.0;

  WheelchairState pose;
  WaypointTracker tracker{PDGains{}};
  double reached_at = -1.0;
  for (int k = 0; k < 1000; ++k) {  // 5 s at 200 Hz
    const double t = k * 0.005;
    const PdCommand cmd = tracker.command(plan, pose, t);
    CHECK(std::abs(cmd.v) <= 10.0);
    CHECK(std::abs(cmd.omega) <= 20.0);
    pose = dynamics::step_wheelchair(pose, cmd.v, cmd.omega, 0.005);
    if (std::hypot(pose.x - 5.0, pose.y) < 0.05) {
      reached_at = t;
      break;
    }
  }
  CHECK(reached_at >= 0.0);
  CHECK(reached_at < 5.0);
}

TEST_CASE("tracker advances through waypoints monotonically") {
  LocalPlan plan;
  for (int i = 0; i < 18; ++i) {
    plan.waypoints.push_back({0.1 * i, 0.0});
  }
  plan.created_at = 0.0;
  plan.waypoint_spacing = 1.0 / 30.0;

  WheelchairState pose;
  WaypointTracker tracker{PDGains{}};
  // After 0.5 s the active waypoint sits well past the start even if the
  // chair lags behind.
  PdCommand cmd{};
  for (int k = 0; k <= 100; ++k) cmd = tracker.command(plan, pose, k * 0.005);
  CHECK(cmd.v > 0.0);  // still driving forward toward a later waypoint
}

TEST_SUITE_END();
