#include <doctest.h>

#include <cmath>
#include <random>

#include "imit2d/dynamics.hpp"

using namespace imit2d;
using namespace imit2d::dynamics;

namespace {

BallParams drag_free() {
  BallParams p;
  p.drag_coeff = 0.0;
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("dynamics");

TEST_CASE("drag-free apex matches the closed-form projectile") {
  BallParams p = drag_free();
  BallState3 s;
  s.pos = {0, 0, 1};
  s.vel = {10, 0, 5};
  const double apex = 1.0 + 5.0 * 5.0 / (2.0 * p.gravity);

  double max_z = 0.0;
  for (const auto& sample : rollout_ball(s, p, 2.0, 0.005)) {
    max_z = std::max(max_z, sample.state.pos.z());
  }
  CHECK(std::abs(max_z - apex) < 1e-4);
}

TEST_CASE("drag-free flight matches the closed form everywhere") {
  // Piecewise-parabola oracle across the first bounce (restitution only,
  // no horizontal loss so x stays linear in t).
  BallParams p = drag_free();
  p.bounce_friction = 0.0;
  BallState3 s;
  s.vel = {10, 0, 5};

  const double t_land = 2.0 * 5.0 / p.gravity;
  // Parabolic arcs chained across bounces; each bounce scales the launch
  // speed by the restitution.
  auto closed_form_z = [&](double t) {
    double vz = 5.0;
    double start = 0.0;
    for (int k = 0; k < 32; ++k) {
      const double duration = 2.0 * vz / p.gravity;
      if (t <= start + duration + 1e-12) {
        const double tau = t - start;
        return vz * tau - 0.5 * p.gravity * tau * tau;
      }
      start += duration;
      vz *= p.restitution;
    }
    return 0.0;
  };

  bool bounced_on_schedule = false;
  int prev_bounce = 0;
  for (const auto& sample : rollout_ball(s, p, 2.0, 0.005)) {
    CHECK(std::abs(sample.state.pos.z() - closed_form_z(sample.t)) < 1e-4);
    CHECK(std::abs(sample.state.pos.x() - 10.0 * sample.t) < 1e-3);
    if (sample.state.bounce_count == 1 && prev_bounce == 0) {
      CHECK(std::abs(sample.t - t_land) <= 0.005 + 1e-9);
      bounced_on_schedule = true;
    }
    prev_bounce = sample.state.bounce_count;
  }
  CHECK(bounced_on_schedule);
  CHECK(std::abs(10.0 * t_land - 10.19) < 0.01);  // analytic range v_x * 2 v_z / g
}

TEST_CASE("resting ball stays put") {
  BallParams p;
  BallState3 s;  // zeros everywhere
  const BallState3 next = step_ball(s, p, 0.01);
  CHECK(next.pos.isApprox(Eigen::Vector3d::Zero(), 0.0));
  CHECK(next.vel.isApprox(Eigen::Vector3d::Zero(), 0.0));
  CHECK(next.bounce_count == 0);
}

TEST_CASE("restitution flips and scales vertical speed") {
  BallParams p = drag_free();
  p.restitution = 0.75;
  BallState3 s;
  s.pos = {0, 0, 0};
  s.vel = {0, 0, -4};
  const BallState3 next = step_ball(s, p, 1e-6);
  CHECK(next.bounce_count == 1);
  CHECK(std::abs(next.vel.z() - 3.0) < 1e-4);
}

TEST_CASE("bounce never speeds the ball up") {
  // Impact rule checked at the impact instant: contact state in, one
  // microscopic step, speed out.
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    BallParams p;
    p.restitution = u(rng);
    p.bounce_friction = u(rng) * 0.5;
    BallState3 s;
    s.pos = {0, 0, 0};
    s.vel = {10.0 * u(rng), -5.0 * u(rng), -8.0 * u(rng)};
    const double speed_in = s.vel.norm();
    const BallState3 out = step_ball(s, p, 1e-6);
    CHECK(out.bounce_count == 1);
    CHECK(out.vel.norm() <= speed_in + 1e-9);
  }
}

TEST_CASE("energy is conserved in drag-free flight") {
  BallParams p = drag_free();
  BallState3 s;
  s.pos = {0, 0, 2};
  s.vel = {8, 3, 1};
  const double e0 = 0.5 * s.vel.squaredNorm() + p.gravity * s.pos.z();
  for (const auto& sample : rollout_ball(s, p, 0.6, 0.005)) {
    if (sample.state.bounce_count > 0) break;
    const double e =
        0.5 * sample.state.vel.squaredNorm() + p.gravity * sample.state.pos.z();
    CHECK(std::abs(e - e0) / e0 < 1e-6);
  }
}

TEST_CASE("ball never penetrates the ground") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    BallParams p;
    BallState3 s;
    s.pos = {0, 0, 1.0 + u(rng)};
    s.vel = {15.0 * u(rng), 5.0 * u(rng), 4.0 * u(rng)};
    for (const auto& sample : rollout_ball(s, p, 3.0, 0.005)) {
      CHECK(sample.state.pos.z() >= -1e-9);
    }
  }
}

TEST_CASE("rollout shape and horizon zero") {
  BallParams p;
  BallState3 s;
  s.pos = {0, 0, 1};
  CHECK(rollout_ball(s, p, 0.0, 0.005).size() == 1);
  const auto traj = rollout_ball(s, p, 1.0, 0.005);
  CHECK(traj.size() == 201);
  CHECK(traj.front().t == 0.0);
  CHECK(traj.front().state.pos == s.pos);
}

TEST_CASE("wheelchair step basics") {
  WheelchairState s;
  const WheelchairState fwd = step_wheelchair(s, 1.0, 0.0, 0.005);
  CHECK(fwd.x == doctest::Approx(0.005));
  CHECK(fwd.y == doctest::Approx(0.0));
  CHECK(fwd.theta == doctest::Approx(0.0));

  const WheelchairState clamped = step_wheelchair(s, 50.0, 0.0, 0.005);
  CHECK(clamped.v == doctest::Approx(10.0));
  CHECK(clamped.x == doctest::Approx(0.05));
}

TEST_CASE("heading stays wrapped") {
  WheelchairState s;
  for (int i = 0; i < 200; ++i) s = step_wheelchair(s, 0.0, 3.2, 0.005);
  CHECK(std::abs(s.theta) <= M_PI);
  CHECK(s.theta == doctest::Approx(3.2 - 2.0 * M_PI).epsilon(1e-9));

  // Exactly pi stays at pi (the interval is half-open at -pi).
  WheelchairState q;
  for (int i = 0; i < 200; ++i) q = step_wheelchair(q, 0.0, M_PI, 0.005);
  CHECK(q.theta <= M_PI);
  CHECK(q.theta > -M_PI);
}

TEST_CASE("wheel decomposition and its inverse") {
  {
    const auto [vl, vr] = twist_to_wheels(1.0, 0.0, 0.6);
    CHECK(vl == doctest::Approx(1.0));
    CHECK(vr == doctest::Approx(1.0));
  }
  {
    const auto [vl, vr] = twist_to_wheels(0.0, 2.0, 0.6);
    CHECK(vl == doctest::Approx(-0.6));
    CHECK(vr == doctest::Approx(0.6));
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const double v = u(rng), w = u(rng), track = 0.3 + std::abs(u(rng));
    const auto [vl, vr] = twist_to_wheels(v, w, track);
    CHECK((vl + vr) / 2.0 == doctest::Approx(v).epsilon(1e-12));
    CHECK((vr - vl) / track == doctest::Approx(w).epsilon(1e-12));
  }
}

TEST_SUITE_END();
