#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "imit2d/harness.hpp"
#include "imit2d/io.hpp"

using namespace imit2d;
using namespace imit2d::harness;

namespace {

DatasetParams small_dataset_params(int n, std::uint64_t seed) {
  DatasetParams params;
  params.episodes = n;
  params.seed = seed;
  return params;
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("imit2d_test_" + tag);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("dataset generation is deterministic and self-consistent") {
  const auto a = generate_dataset(small_dataset_params(3, 42));
  const auto b = generate_dataset(small_dataset_params(3, 42));
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ball_court == b[i].ball_court);
    CHECK(a[i].chair_image == b[i].chair_image);
    CHECK(a[i].t == b[i].t);
  }

  for (const auto& ep : a) {
    REQUIRE(ep.t.size() > 10);
    // Chair image points are exact homography images of the court track.
    for (Eigen::Index i = 0; i < ep.t.size(); ++i) {
      const auto px = geometry::apply_homography(
          ep.homography,
          geometry::CourtPoint{ep.chair_court(i, 0), ep.chair_court(i, 1)});
      CHECK(std::hypot(px.u - ep.chair_image(i, 0), px.v - ep.chair_image(i, 1)) <
            1e-6);
      // Ball image points are exact camera projections.
      const auto ball_px = geometry::project_point(
          ep.camera, Eigen::Vector3d(ep.ball_court.row(i).transpose()));
      CHECK(ball_px.u == ep.ball_image(i, 0));
      CHECK(ball_px.v == ep.ball_image(i, 1));
    }
  }
}

TEST_CASE("episode files round-trip byte for byte") {
  const auto episodes = generate_dataset(small_dataset_params(1, 7));
  const auto dir = temp_dir("episode_io");
  const auto path = (dir / io::episode_filename(0)).string();

  io::save_episode(episodes[0], path);
  const auto path2 = (dir / "copy.bin").string();
  io::save_episode(episodes[0], path2);
  CHECK(io::hash_file(path) == io::hash_file(path2));

  const Episode loaded = io::load_episode(path);
  CHECK(loaded.id == episodes[0].id);
  CHECK(loaded.fps == episodes[0].fps);
  CHECK(loaded.valid == episodes[0].valid);
  CHECK(loaded.t == episodes[0].t);
  CHECK(loaded.ball_court == episodes[0].ball_court);
  CHECK(loaded.ball_vel == episodes[0].ball_vel);
  CHECK(loaded.ball_image == episodes[0].ball_image);
  CHECK(loaded.chair_court == episodes[0].chair_court);
  CHECK(loaded.chair_image == episodes[0].chair_image);
  CHECK(loaded.homography.matrix() == episodes[0].homography.matrix());
  CHECK(loaded.camera.rotation == episodes[0].camera.rotation);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scripted expert picks reachable intercepts") {
  dynamics::WheelchairState chair;
  chair.x = 23.77;
  chair.y = 0.0;

  // Ball passing straight through the chair position.
  std::vector<dynamics::TimedBallState> pred;
  for (int i = 0; i <= 100; ++i) {
    dynamics::TimedBallState s;
    s.t = 0.01 * i;
    s.state.pos = {13.77 + 0.1 * i, 0.0, 0.5};
    s.state.bounce_count = 1;
    pred.push_back(s);
  }
  const ExpertTarget through = scripted_expert(pred, chair, 4.0);
  CHECK(!through.fallback);
  // The first sample already reachable is the earliest whose distance over
  // speed fits in the lead time.
  const double d0 = std::hypot(pred[0].state.pos.x() - chair.x, 0.0);
  CHECK(d0 / 4.0 > 0.0);
  CHECK(std::hypot(through.point.x - chair.x, through.point.y - chair.y) <= 10.0);

  // Unreachable: all samples gone in a blink.
  std::vector<dynamics::TimedBallState> fast;
  for (int i = 0; i <= 3; ++i) {
    dynamics::TimedBallState s;
    s.t = 0.01 * i;
    s.state.pos = {3.0, 8.0, 0.5};
    s.state.bounce_count = 1;
    fast.push_back(s);
  }
  const ExpertTarget fb = scripted_expert(fast, chair, 4.0);
  CHECK(fb.fallback);
  CHECK(fb.point.x == doctest::Approx(3.0));
  CHECK(fb.point.y == doctest::Approx(8.0));
}

TEST_CASE("expert closed loop succeeds on the default launches") {
  const auto episodes = generate_dataset(small_dataset_params(25, 11));
  TebPlanner expert{CourtGeometry{}};
  ClosedLoopParams cfg;
  cfg.seed = 3;
  cfg.jobs = 2;
  const auto outcome = run_closed_loop(expert, episodes, cfg);
  REQUIRE(outcome.results.size() == 25);
  CHECK(outcome.success_rate() >= 0.9);
}

TEST_CASE("closed loop runs are deterministic") {
  const auto episodes = generate_dataset(small_dataset_params(4, 13));
  TebPlanner expert{CourtGeometry{}};
  ClosedLoopParams cfg;
  cfg.seed = 5;
  cfg.jobs = 2;
  const auto a = run_closed_loop(expert, episodes, cfg);
  const auto b = run_closed_loop(expert, episodes, cfg);
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    CHECK(a.results[i].success == b.results[i].success);
    CHECK(a.results[i].min_distance == b.results[i].min_distance);
  }
}

TEST_CASE("re-scoring a trace reproduces the outcome") {
  const auto episodes = generate_dataset(small_dataset_params(3, 17));
  TebPlanner expert{CourtGeometry{}};
  ClosedLoopParams cfg;
  cfg.seed = 2;
  cfg.keep_traces = true;
  const auto outcome = run_closed_loop(expert, episodes, cfg);
  REQUIRE(outcome.traces.size() == outcome.results.size());
  for (std::size_t i = 0; i < outcome.traces.size(); ++i) {
    const EpisodeResult rescored =
        score_trace(outcome.traces[i], cfg.success_radius, cfg.max_bounces);
    CHECK(rescored.success == outcome.results[i].success);
    CHECK(rescored.min_distance == outcome.results[i].min_distance);
    CHECK(rescored.bounces_at_min == outcome.results[i].bounces_at_min);
  }
  // Wheel commands in the trace always satisfy the platform limits.
  for (const auto& trace : outcome.traces) {
    for (const auto& tick : trace.ticks) {
      CHECK(std::abs(tick.v_cmd) <= 10.0);
      CHECK(std::abs(tick.omega_cmd) <= 20.0);
    }
  }
}

TEST_CASE("an impossible launch fails") {
  // Hand-built episode: ball lands 20 m away and stops bouncing almost
  // immediately; the chair cannot cover the gap.
  Episode ep;
  ep.id = 99;
  ep.fps = 30.0;
  const int n = 4;
  ep.t.resize(n);
  ep.ball_image.resize(n, 2);
  ep.chair_image.resize(n, 2);
  ep.ball_court.resize(n, 3);
  ep.ball_vel.resize(n, 3);
  ep.ball_bounce.resize(n);
  ep.chair_court.resize(n, 2);
  ep.camera = make_broadcast_camera();
  ep.homography = geometry::ground_plane_homography(ep.camera);
  for (int i = 0; i < n; ++i) {
    ep.t(i) = i / 30.0;
    ep.ball_court.row(i) = Eigen::RowVector3d(2.0, 4.0, 0.05);
    ep.ball_vel.row(i) = Eigen::RowVector3d(0, 0, -2.0);
    ep.ball_bounce(i) = 0;
    ep.chair_court.row(i) = Eigen::RowVector2d(23.77, 0.0);
    ep.ball_image.row(i) = Eigen::RowVector2d(100, 100);
    ep.chair_image.row(i) = Eigen::RowVector2d(600, 600);
  }
  TebPlanner expert{CourtGeometry{}};
  ClosedLoopParams cfg;
  const auto outcome = run_closed_loop(expert, {ep}, cfg);
  REQUIRE(outcome.results.size() == 1);
  CHECK(!outcome.results[0].success);
  CHECK(outcome.results[0].min_distance > 1.4);
}

TEST_CASE("live perception degrades but still reports estimator statistics") {
  const auto episodes = generate_dataset(small_dataset_params(6, 23));
  TebPlanner expert{CourtGeometry{}};

  ClosedLoopParams cfg;
  cfg.seed = 9;
  cfg.perception = PerceptionMode::kLive;
  cfg.rig = make_wall_rig(CourtGeometry{}, 2.0, 0.2);
  const auto live = run_closed_loop(expert, episodes, cfg);
  CHECK(live.live.solves > 0);
  CHECK(live.live.mean_position_error > 0.0);
  CHECK(live.live.mean_position_error < 1.0);
}

TEST_CASE("offline evaluation: self-prediction scores zero") {
  // A predictor that returns the ground-truth window must produce zero
  // rmse/dtw/icp and the ground truth's own jerk.
  class OraclePredictor : public TrajectoryPredictor {
   public:
    explicit OraclePredictor(const Episode& ep, const policy::Normalizer& image)
        : ep_(ep), image_(image) {}
    policy::Points2 predict(const policy::Points2&, const Eigen::Vector2d& chair,
                            std::uint64_t) const override {
      const policy::Points2 chair_unit = image_.to_unit(ep_.chair_image);
      // Locate the window start by matching the conditioning position.
      for (Eigen::Index k = 0; k + 18 <= chair_unit.rows(); ++k) {
        if ((chair_unit.row(k).transpose() - chair).norm() < 1e-12) {
          return chair_unit.middleRows(k, 18);
        }
      }
      REQUIRE(false);
      return {};
    }
    std::string name() const override { return "oracle"; }

   private:
    const Episode& ep_;
    policy::Normalizer image_;
  };

  auto episodes = generate_dataset(small_dataset_params(1, 29));
  episodes[0].valid = true;
  OfflineEvalParams params;
  params.stride = 5;
  OraclePredictor oracle(episodes[0], params.image_norm);
  const OfflineMetrics m = evaluate_offline(oracle, episodes, params);
  CHECK(m.rmse < 1e-6);
  CHECK(m.dtw < 1e-5);
  CHECK(m.icp < 1e-6);
  CHECK(m.jerk > 0.0);
  CHECK(m.windows > 0);
}

TEST_CASE("constant predictor scores worse than zero error") {
  const auto episodes = generate_dataset(small_dataset_params(2, 31));
  OfflineEvalParams params;
  params.stride = 5;
  const ConstantPredictor constant;
  const OfflineMetrics m = evaluate_offline(constant, episodes, params);
  CHECK(m.rmse > 0.05);
  CHECK(m.jerk < 1e-8);
}

TEST_CASE("evaluation with no usable windows is an error") {
  std::vector<Episode> episodes = generate_dataset(small_dataset_params(1, 37));
  episodes[0].valid = false;
  OfflineEvalParams params;
  const ConstantPredictor constant;
  CHECK_THROWS_AS(evaluate_offline(constant, episodes, params), NoValidWindows);
}

TEST_SUITE_END();
