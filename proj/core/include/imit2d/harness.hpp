#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imit2d/control.hpp"
#include "imit2d/dynamics.hpp"
#include "imit2d/geometry.hpp"
#include "imit2d/perception.hpp"
#include "imit2d/policy.hpp"

namespace imit2d::harness {

struct LengthMismatch : Error {
  using Error::Error;
};
struct TooShort : Error {
  using Error::Error;
};
struct NoValidWindows : Error {
  using Error::Error;
};
struct CheckpointMismatch : Error {
  using Error::Error;
};

// Court frame: x runs from the far baseline (0) to the near baseline
// (length), y spans the width symmetrically, z is up.
struct CourtGeometry {
  double length{23.77};
  double width{10.97};
  double margin{2.0};  // allowed overshoot beyond the lines for the chair

  policy::Normalizer normalizer() const {
    return {{-margin, -width / 2.0 - margin},
            {length + margin, width / 2.0 + margin}};
  }
  geometry::CourtPoint chair_start() const { return {length, 0.0}; }
};

// Synthetic broadcast camera behind the near baseline, plus the wall rig
// used for ball-state estimation.
geometry::CameraModel make_broadcast_camera(const CourtGeometry& court = {});
perception::CameraRig make_wall_rig(const CourtGeometry& court = {},
                                    double pixel_noise_sigma = 1.0,
                                    double dropout_prob = 0.05);

// One recorded rally: synchronized tracks at `fps` in both frames, plus
// the projective maps that tie them together.
struct Episode {
  std::uint64_t id{0};
  double fps{30.0};
  Eigen::VectorXd t;             // N
  policy::Points2 ball_image;    // N x 2, px
  policy::Points2 chair_image;   // N x 2, px
  Eigen::MatrixX3d ball_court;   // N x 3, m
  Eigen::MatrixX3d ball_vel;     // N x 3, m/s
  Eigen::VectorXi ball_bounce;   // N
  policy::Points2 chair_court;   // N x 2, m
  geometry::Homography homography;  // court plane -> image
  geometry::CameraModel camera;
  bool valid{true};
};

struct EpisodeResult {
  std::uint64_t episode_id{0};
  bool success{false};
  double min_distance{0.0};  // m, ground-plane distance before the cutoff bounce
  int bounces_at_min{0};
  // Offline metrics; NaN for closed-loop results.
  double rmse{std::numeric_limits<double>::quiet_NaN()};
  double dtw{std::numeric_limits<double>::quiet_NaN()};
  double icp{std::numeric_limits<double>::quiet_NaN()};
  double jerk{std::numeric_limits<double>::quiet_NaN()};
};

struct LaunchDistribution {
  std::pair<double, double> speed{13.0, 19.0};     // m/s
  std::pair<double, double> azimuth{-0.05, 0.05};  // rad of jitter around the aim
  std::pair<double, double> height{1.0, 2.2};      // m
  std::pair<double, double> lateral{-4.0, 4.0};    // m, aim offset at the target plane
  std::uint64_t seed{0};
};

enum class ExpertKind { kScripted, kTeb };

struct DatasetParams {
  int episodes{100};
  LaunchDistribution launch;
  ExpertKind expert{ExpertKind::kScripted};
  CourtGeometry court;
  dynamics::BallParams ball;
  control::PDGains gains;
  double fps{30.0};
  double control_dt{dynamics::kControlDt};
  double v_max_plan{4.0};       // straight-line reachability bound, m/s
  double max_duration{4.0};     // s
  double success_radius{1.4};   // m
  int max_bounces{3};
  double image_width{1280.0};
  double image_height{720.0};
  std::uint64_t seed{0};
  bool camera_jitter{false};    // perturb the broadcast pose per episode
};

struct DatasetStats {
  int episodes{0};
  int expert_successes{0};
  int in_frame{0};
};

std::vector<Episode> generate_dataset(const DatasetParams& params,
                                      DatasetStats* stats = nullptr);

struct ExpertTarget {
  geometry::CourtPoint point;
  bool fallback{false};  // no reachable point existed; nearest chosen
};

// Scans the predicted samples between the first and second bounce for the
// earliest one reachable under a straight-line speed bound; falls back to
// the closest predicted point when none is reachable in time.
ExpertTarget scripted_expert(std::span<const dynamics::TimedBallState> prediction,
                             const dynamics::WheelchairState& chair,
                             double v_max_plan);

// --- trajectory metrics ---

double metric_rmse(const policy::Points2& pred, const policy::Points2& gt);
double metric_dtw(const policy::Points2& pred, const policy::Points2& gt);
double metric_icp(const policy::Points2& pred, const policy::Points2& gt,
                  int max_iterations = 50);
double metric_jerk(const policy::Points2& traj, double dt);

// Best rigid (rotation + translation) alignment of paired 2D point sets
// via the cross-covariance angle; exposed for the metric tests.
struct RigidTransform2 {
  Eigen::Matrix2d rotation{Eigen::Matrix2d::Identity()};
  Eigen::Vector2d translation{Eigen::Vector2d::Zero()};
};

RigidTransform2 align_rigid(const policy::Points2& from, const policy::Points2& to);

// --- offline evaluation ---

// Predicts normalized waypoint blocks from normalized conditioning.
class TrajectoryPredictor {
 public:
  virtual ~TrajectoryPredictor() = default;
  virtual policy::Points2 predict(const policy::Points2& ball_unit,
                                  const Eigen::Vector2d& chair_unit,
                                  std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

class DiffusionPredictor : public TrajectoryPredictor {
 public:
  DiffusionPredictor(nn::DenseNet net, policy::NoiseSchedule schedule,
                     policy::DiffusionConfig cfg);
  policy::Points2 predict(const policy::Points2& ball_unit,
                          const Eigen::Vector2d& chair_unit,
                          std::uint64_t seed) const override;
  std::string name() const override { return "diffusion"; }

 private:
  nn::DenseNet net_;
  policy::NoiseSchedule schedule_;
  policy::DiffusionConfig cfg_;
};

class FcrPredictor : public TrajectoryPredictor {
 public:
  explicit FcrPredictor(nn::DenseNet net) : net_(std::move(net)) {}
  policy::Points2 predict(const policy::Points2& ball_unit,
                          const Eigen::Vector2d& chair_unit,
                          std::uint64_t /*seed*/) const override {
    return policy::predict_fcr(net_, ball_unit, chair_unit);
  }
  std::string name() const override { return "fcr"; }

 private:
  nn::DenseNet net_;
};

class AeFcrPredictor : public TrajectoryPredictor {
 public:
  explicit AeFcrPredictor(policy::AeFcr model) : model_(std::move(model)) {}
  policy::Points2 predict(const policy::Points2& ball_unit,
                          const Eigen::Vector2d& chair_unit,
                          std::uint64_t /*seed*/) const override {
    return policy::predict_ae_fcr(model_, ball_unit, chair_unit);
  }
  std::string name() const override { return "ae-fcr"; }

 private:
  policy::AeFcr model_;
};

// Repeats the current position; the no-skill reference.
class ConstantPredictor : public TrajectoryPredictor {
 public:
  explicit ConstantPredictor(int horizon = 18) : horizon_(horizon) {}
  policy::Points2 predict(const policy::Points2&, const Eigen::Vector2d& chair_unit,
                          std::uint64_t) const override {
    policy::Points2 out(horizon_, 2);
    out.rowwise() = chair_unit.transpose();
    return out;
  }
  std::string name() const override { return "constant"; }

 private:
  int horizon_;
};

struct OfflineEvalParams {
  policy::ConditionMode mode{policy::ConditionMode::kPost2D};
  policy::ActionSpace action{policy::ActionSpace::kImage};
  policy::Normalizer image_norm{policy::Normalizer::image_frame()};
  policy::Normalizer court_norm;
  int history{32};
  int horizon{18};
  int stride{1};
  std::uint64_t seed{0};
};

struct OfflineMetrics {
  double rmse{0.0};
  double dtw{0.0};
  double icp{0.0};
  double jerk{0.0};
  int windows{0};
};

// Per-window prediction against the expert ground truth, reported in
// meters (image-space actions are warped through the inverse homography).
OfflineMetrics evaluate_offline(const TrajectoryPredictor& predictor,
                                const std::vector<Episode>& episodes,
                                const OfflineEvalParams& params);

// --- closed loop ---

enum class PerceptionMode { kHybrid, kLive };

struct PlanRequest {
  policy::Points2 ball_window_px;  // history x 2
  Eigen::Vector2d chair_px{Eigen::Vector2d::Zero()};
  dynamics::WheelchairState chair;
  std::span<const dynamics::TimedBallState> ball_prediction;  // absolute times
  double t_now{0.0};
  const Episode* episode{nullptr};
};

class ClosedLoopPlanner {
 public:
  virtual ~ClosedLoopPlanner() = default;
  virtual control::LocalPlan plan(const PlanRequest& request,
                                  std::uint64_t seed) const = 0;
  virtual policy::ConditionMode condition_mode() const = 0;
  virtual std::string name() const = 0;
};

class ImitationPlanner : public ClosedLoopPlanner {
 public:
  ImitationPlanner(std::shared_ptr<const TrajectoryPredictor> predictor,
                   policy::ConditionMode mode, policy::ActionSpace action,
                   policy::Normalizer image_norm, policy::Normalizer court_norm,
                   CourtGeometry court, double fps = 30.0,
                   double replan_period = 0.2);
  control::LocalPlan plan(const PlanRequest& request,
                          std::uint64_t seed) const override;
  policy::ConditionMode condition_mode() const override { return mode_; }
  std::string name() const override { return predictor_->name(); }

 private:
  std::shared_ptr<const TrajectoryPredictor> predictor_;
  policy::ConditionMode mode_;
  policy::ActionSpace action_;
  policy::Normalizer image_norm_;
  policy::Normalizer court_norm_;
  CourtGeometry court_;
  double fps_;
  double replan_period_;
};

// Non-learning baseline: drives to the scripted intercept target computed
// from the current ball prediction.
class TebPlanner : public ClosedLoopPlanner {
 public:
  TebPlanner(CourtGeometry court, double v_max_plan = 4.0,
             double replan_period = 0.2);
  control::LocalPlan plan(const PlanRequest& request,
                          std::uint64_t seed) const override;
  policy::ConditionMode condition_mode() const override {
    return policy::ConditionMode::kPost2D;
  }
  std::string name() const override { return "teb"; }

 private:
  CourtGeometry court_;
  double v_max_plan_;
  double replan_period_;
};

struct ClosedLoopParams {
  PerceptionMode perception{PerceptionMode::kHybrid};
  double success_radius{1.4};
  int max_bounces{3};
  double replan_period{0.2};
  double control_dt{dynamics::kControlDt};
  double estimator_window{0.3};  // s of detections per live solve
  double prediction_horizon{3.0};
  control::PDGains gains;
  perception::CameraRig rig;  // live mode only
  dynamics::BallParams ball;
  CourtGeometry court;
  int history{32};
  std::uint64_t seed{0};
  int jobs{1};
  bool keep_traces{false};
};

struct TraceTick {
  double t{0.0};
  Eigen::Vector3d ball_pos{Eigen::Vector3d::Zero()};
  int ball_bounce{0};
  dynamics::WheelchairState chair;
  double v_cmd{0.0}, omega_cmd{0.0};
  double v_left{0.0}, v_right{0.0};
};

struct EpisodeTrace {
  std::uint64_t episode_id{0};
  std::vector<TraceTick> ticks;
};

struct LiveStats {
  int solves{0};
  int failures{0};
  double mean_position_error{0.0};  // m, estimate vs truth at solve times
  double max_position_error{0.0};
};

struct ClosedLoopOutcome {
  std::vector<EpisodeResult> results;
  LiveStats live;
  std::vector<EpisodeTrace> traces;  // only when keep_traces
  int successes() const;
  double success_rate() const;
};

ClosedLoopOutcome run_closed_loop(const ClosedLoopPlanner& planner,
                                  const std::vector<Episode>& episodes,
                                  const ClosedLoopParams& params);

// Success is a pure function of the logged trajectory.
EpisodeResult score_trace(const EpisodeTrace& trace, double success_radius,
                          int max_bounces);

// 95% Wilson score interval for a Bernoulli rate.
std::pair<double, double> wilson_interval(int successes, int trials,
                                          double z = 1.959963984540054);

}  // namespace imit2d::harness
