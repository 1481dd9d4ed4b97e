#include <doctest.h>

#include <algorithm>
#include <random>

#include "imit2d/harness.hpp"
#include "imit2d/perception.hpp"

using namespace imit2d;
using namespace imit2d::perception;

namespace {

// Short flight segment across the middle of the court, no bounce.
std::vector<dynamics::TimedBallState> flight_segment(double horizon = 0.3) {
  dynamics::BallState3 s;
  s.pos = {4.0, 0.5, 2.0};
  s.vel = {14.0, -1.0, 1.5};
  return dynamics::rollout_ball(s, dynamics::BallParams{}, horizon, 0.005);
}

CameraRig noiseless_rig() {
  CameraRig rig = harness::make_wall_rig();
  rig.pixel_noise_sigma = 0.0;
  rig.dropout_prob = 0.0;
  return rig;
}

}  // namespace

TEST_SUITE_BEGIN("perception");

TEST_CASE("noiseless single camera detects every visible sample exactly") {
  CameraRig rig;
  rig.cameras.push_back(
      geometry::make_look_at_camera({-3, 0, 5.5}, {12, 0, 0.5}, 600, 600, 640, 360));
  rig.pixel_noise_sigma = 0.0;
  rig.dropout_prob = 0.0;

  const auto traj = flight_segment();
  std::vector<dynamics::TimedBallState> ten(traj.begin(), traj.begin() + 10);
  const auto dets = synthesize_detections(ten, rig, 1);
  REQUIRE(dets.size() == 10);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto px = geometry::project_point(rig.cameras[0], ten[i].state.pos);
    CHECK(dets[i].px.u == px.u);
    CHECK(dets[i].px.v == px.v);
    CHECK(dets[i].t == ten[i].t);
  }
}

TEST_CASE("dropout thins detections at the binomial rate") {
  CameraRig rig;
  rig.cameras.push_back(
      geometry::make_look_at_camera({-3, 0, 5.5}, {12, 0, 0.5}, 600, 600, 640, 360));
  rig.pixel_noise_sigma = 0.0;
  const double keep = 0.05;
  rig.dropout_prob = 1.0 - keep;

  std::vector<dynamics::TimedBallState> samples(10000, flight_segment()[0]);
  const auto dets = synthesize_detections(samples, rig, 7);
  const double expected = keep * 10000;
  const double sigma = std::sqrt(10000 * keep * (1.0 - keep));
  CHECK(std::abs(static_cast<double>(dets.size()) - expected) < 3.0 * sigma);
}

TEST_CASE("a ball behind a camera is never detected") {
  CameraRig rig;
  // Camera at the far wall looking away from the court.
  rig.cameras.push_back(
      geometry::make_look_at_camera({-3, 0, 5.5}, {-20, 0, 5.5}, 600, 600, 640, 360));
  rig.pixel_noise_sigma = 0.0;
  rig.dropout_prob = 0.0;
  const auto dets = synthesize_detections(flight_segment(), rig, 3);
  CHECK(dets.empty());
}

TEST_CASE("noiseless six-camera estimation recovers the state") {
  const CameraRig rig = noiseless_rig();
  const auto traj = flight_segment();
  const auto dets = synthesize_detections(traj, rig, 5);

  const auto details =
      estimate_ball_state_detailed(dets, rig, dynamics::BallParams{}, 0.0);
  CHECK((details.state.pos - traj[0].state.pos).norm() < 1e-6);
  CHECK((details.state.vel - traj[0].state.vel).norm() < 1e-5);
  CHECK(details.final_cost < 1e-12);
}

TEST_CASE("estimate is invariant to detection order") {
  const CameraRig rig = noiseless_rig();
  auto dets = synthesize_detections(flight_segment(), rig, 5);

  const auto a = estimate_ball_state(dets, rig, dynamics::BallParams{}, 0.0);
  std::mt19937_64 rng(2);
  std::shuffle(dets.begin(), dets.end(), rng);
  const auto b = estimate_ball_state(dets, rig, dynamics::BallParams{}, 0.0);
  CHECK((a.pos - b.pos).norm() == 0.0);
  CHECK((a.vel - b.vel).norm() == 0.0);
}

TEST_CASE("accepted Gauss-Newton iterates never increase the cost") {
  CameraRig rig = harness::make_wall_rig();
  rig.pixel_noise_sigma = 1.0;
  rig.dropout_prob = 0.1;
  const auto dets = synthesize_detections(flight_segment(), rig, 11);
  const auto details =
      estimate_ball_state_detailed(dets, rig, dynamics::BallParams{}, 0.0);
  for (std::size_t i = 1; i < details.cost_history.size(); ++i) {
    CHECK(details.cost_history[i] <= details.cost_history[i - 1] + 1e-9);
  }
}

TEST_CASE("noisy estimation stays within 5 cm in at least 95 of 100 trials") {
  CameraRig rig = harness::make_wall_rig();
  rig.pixel_noise_sigma = 1.0;
  rig.dropout_prob = 0.0;
  const auto traj = flight_segment();

  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto dets = synthesize_detections(traj, rig, 1000 + trial);
    try {
      const auto est = estimate_ball_state(dets, rig, dynamics::BallParams{}, 0.0);
      if ((est.pos - traj[0].state.pos).norm() < 0.05) ++good;
    } catch (const Error&) {
    }
  }
  CHECK(good >= 95);
}

TEST_CASE("single-instant single-camera input is rejected") {
  CameraRig rig;
  rig.cameras.push_back(
      geometry::make_look_at_camera({-3, 0, 5.5}, {12, 0, 0.5}, 600, 600, 640, 360));
  std::vector<Detection> dets(8);
  for (auto& d : dets) {
    d.camera_id = 0;
    d.t = 0.1;
    d.px = {640, 360};
  }
  CHECK_THROWS_AS(
      estimate_ball_state(dets, rig, dynamics::BallParams{}, 0.0),
      InsufficientObservations);

  CHECK_THROWS_AS(
      estimate_ball_state({}, rig, dynamics::BallParams{}, 0.0),
      InsufficientObservations);
}

TEST_CASE("reference time propagation uses the flight model") {
  const CameraRig rig = noiseless_rig();
  const auto traj = flight_segment();
  const auto dets = synthesize_detections(traj, rig, 5);

  // Ask for the state a few samples into the window.
  const auto est = estimate_ball_state(dets, rig, dynamics::BallParams{}, 0.05);
  const auto& truth = traj[10];  // 0.05 / 0.005
  CHECK(truth.t == doctest::Approx(0.05));
  CHECK((est.pos - truth.state.pos).norm() < 1e-6);
}

TEST_SUITE_END();
