#include "imit2d/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace imit2d::harness {
namespace {

constexpr double kTrackWidth = 0.6;  // m, wheel separation for the trace log

double uniform_in(std::mt19937_64& rng, const std::pair<double, double>& range) {
  std::uniform_real_distribution<double> dist(range.first, range.second);
  return dist(rng);
}

// First control tick at or after the given frame instant; both the
// recorder and the closed loop sample frames with this rule.
std::size_t tick_of_frame(int frame, double frame_dt, double dt) {
  return static_cast<std::size_t>(
      std::ceil(frame * frame_dt / dt - 1e-9));
}

geometry::CourtPoint clamp_to_court(const geometry::CourtPoint& p,
                                    const CourtGeometry& court) {
  return {std::clamp(p.x, -court.margin, court.length + court.margin),
          std::clamp(p.y, -court.width / 2.0 - court.margin,
                     court.width / 2.0 + court.margin)};
}

bool in_frame(const geometry::ImagePoint& px, double w, double h) {
  return px.u >= 0.0 && px.u <= w && px.v >= 0.0 && px.v <= h;
}

}  // namespace

geometry::CameraModel make_broadcast_camera(const CourtGeometry& court) {
  const Eigen::Vector3d eye(court.length + 14.2, 0.0, 18.0);
  const Eigen::Vector3d target(11.0, 0.0, 0.0);
  return geometry::make_look_at_camera(eye, target, 800.0, 800.0, 640.0, 360.0);
}

perception::CameraRig make_wall_rig(const CourtGeometry& court,
                                    double pixel_noise_sigma,
                                    double dropout_prob) {
  perception::CameraRig rig;
  rig.pixel_noise_sigma = pixel_noise_sigma;
  rig.dropout_prob = dropout_prob;
  const Eigen::Vector3d center(court.length / 2.0, 0.0, 0.5);
  for (double x : {-3.0, court.length + 3.0}) {
    for (double y : {-6.0, 0.0, 6.0}) {
      rig.cameras.push_back(geometry::make_look_at_camera(
          {x, y, 5.5}, center, 600.0, 600.0, 640.0, 360.0));
    }
  }
  return rig;
}

ExpertTarget scripted_expert(std::span<const dynamics::TimedBallState> prediction,
                             const dynamics::WheelchairState& chair,
                             double v_max_plan) {
  if (prediction.empty()) return {{chair.x, chair.y}, true};
  const double now = prediction.front().t;

  const dynamics::TimedBallState* closest = nullptr;
  double closest_dist = std::numeric_limits<double>::infinity();
  bool saw_intercept_phase = false;

  for (const auto& sample : prediction) {
    const bool intercept_phase = sample.state.bounce_count == 1;
    if (intercept_phase) saw_intercept_phase = true;
    if (saw_intercept_phase && !intercept_phase && sample.state.bounce_count > 1) {
      break;  // past the second bounce
    }
    if (!intercept_phase) continue;

    const double dist = std::hypot(sample.state.pos.x() - chair.x,
                                   sample.state.pos.y() - chair.y);
    if (dist / v_max_plan <= sample.t - now) {
      return {{sample.state.pos.x(), sample.state.pos.y()}, false};
    }
    if (dist < closest_dist) {
      closest_dist = dist;
      closest = &sample;
    }
  }

  if (closest == nullptr) {
    // No samples between the bounces at all; aim for the closest of the
    // remaining prediction.
    for (const auto& sample : prediction) {
      const double dist = std::hypot(sample.state.pos.x() - chair.x,
                                     sample.state.pos.y() - chair.y);
      if (dist < closest_dist) {
        closest_dist = dist;
        closest = &sample;
      }
    }
  }
  return {{closest->state.pos.x(), closest->state.pos.y()}, true};
}

std::vector<Episode> generate_dataset(const DatasetParams& params,
                                      DatasetStats* stats) {
  const geometry::CameraModel base_camera = make_broadcast_camera(params.court);
  std::vector<Episode> episodes;
  episodes.reserve(static_cast<std::size_t>(params.episodes));
  DatasetStats local;

  const double dt = params.control_dt;
  const double frame_dt = 1.0 / params.fps;
  const double aim_plane = params.court.length - 3.0;

  for (int e = 0; e < params.episodes; ++e) {
    std::mt19937_64 rng(split_seed(params.seed ^ params.launch.seed,
                                   static_cast<std::uint64_t>(e)));

    const double speed = uniform_in(rng, params.launch.speed);
    const double jitter = uniform_in(rng, params.launch.azimuth);
    const double height = uniform_in(rng, params.launch.height);
    const double lateral = uniform_in(rng, params.launch.lateral);

    dynamics::BallState3 launch;
    launch.pos = {0.3, 0.0, height};
    const double aim = std::atan2(lateral, aim_plane - launch.pos.x()) + jitter;
    launch.vel = {speed * std::cos(aim), speed * std::sin(aim), 0.0};

    auto truth = dynamics::rollout_ball(launch, params.ball, params.max_duration, dt);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i].state.bounce_count >= params.max_bounces) {
        truth.resize(i + 1);
        break;
      }
    }

    geometry::CameraModel camera = base_camera;
    if (params.camera_jitter) {
      std::uniform_real_distribution<double> d(-0.4, 0.4);
      const Eigen::Vector3d eye(params.court.length + 14.2 + d(rng), d(rng),
                                18.0 + d(rng));
      camera = geometry::make_look_at_camera(eye, {11.0, 0.0, 0.0}, 800.0, 800.0,
                                             640.0, 360.0);
    }
    const geometry::Homography h = geometry::ground_plane_homography(camera);

    dynamics::WheelchairState chair;
    chair.x = params.court.chair_start().x;
    chair.y = params.court.chair_start().y;
    chair.theta = M_PI;

    control::WaypointTracker tracker(params.gains);
    double next_replan = 0.0;
    const double replan_dt =
        params.expert == ExpertKind::kTeb ? 0.2 : dt;  // scripted retargets every tick
    control::LocalPlan plan;
    bool have_plan = false;

    std::vector<double> rec_t;
    std::vector<Eigen::Vector3d> rec_ball_pos, rec_ball_vel;
    std::vector<int> rec_bounce;
    std::vector<Eigen::Vector2d> rec_chair;
    int next_frame = 0;
    double min_dist = std::numeric_limits<double>::infinity();
    bool frame_ok = true;

    for (std::size_t k = 0; k < truth.size(); ++k) {
      const double t = truth[k].t;
      const auto& ball = truth[k].state;

      if (t + 1e-9 >= next_replan) {
        next_replan += replan_dt;
        const ExpertTarget target = scripted_expert(
            std::span<const dynamics::TimedBallState>(truth).subspan(k), chair,
            params.v_max_plan);
        plan.waypoints = {clamp_to_court(target.point, params.court)};
        plan.created_at = t;
        plan.waypoint_spacing = frame_dt;
        plan.replan_period = replan_dt;
        have_plan = true;
      }

      if (ball.bounce_count < params.max_bounces) {
        min_dist = std::min(min_dist, std::hypot(ball.pos.x() - chair.x,
                                                 ball.pos.y() - chair.y));
      }

      if (k == tick_of_frame(next_frame, frame_dt, dt)) {
        rec_t.push_back(t);
        rec_ball_pos.push_back(ball.pos);
        rec_ball_vel.push_back(ball.vel);
        rec_bounce.push_back(ball.bounce_count);
        rec_chair.push_back({chair.x, chair.y});
        ++next_frame;
      }

      const control::PdCommand cmd =
          have_plan ? tracker.command(plan, chair, t) : control::PdCommand{};
      chair = dynamics::step_wheelchair(chair, cmd.v, cmd.omega, dt);
    }

    Episode ep;
    ep.id = static_cast<std::uint64_t>(e);
    ep.fps = params.fps;
    ep.camera = camera;
    ep.homography = h;
    const Eigen::Index n = static_cast<Eigen::Index>(rec_t.size());
    ep.t.resize(n);
    ep.ball_image.resize(n, 2);
    ep.chair_image.resize(n, 2);
    ep.ball_court.resize(n, 3);
    ep.ball_vel.resize(n, 3);
    ep.ball_bounce.resize(n);
    ep.chair_court.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      ep.t(i) = rec_t[idx];
      ep.ball_court.row(i) = rec_ball_pos[idx].transpose();
      ep.ball_vel.row(i) = rec_ball_vel[idx].transpose();
      ep.ball_bounce(i) = rec_bounce[idx];
      ep.chair_court.row(i) = rec_chair[idx].transpose();

      const auto ball_px = geometry::project_point(camera, rec_ball_pos[idx]);
      const auto chair_px =
          geometry::apply_homography(
          h, geometry::CourtPoint{rec_chair[idx].x(), rec_chair[idx].y()});
      ep.ball_image(i, 0) = ball_px.u;
      ep.ball_image(i, 1) = ball_px.v;
      ep.chair_image(i, 0) = chair_px.u;
      ep.chair_image(i, 1) = chair_px.v;
      frame_ok = frame_ok &&
                 in_frame(ball_px, params.image_width, params.image_height) &&
                 in_frame(chair_px, params.image_width, params.image_height);
    }

    const bool expert_success = min_dist < params.success_radius;
    ep.valid = frame_ok && expert_success;
    local.episodes++;
    local.expert_successes += expert_success ? 1 : 0;
    local.in_frame += frame_ok ? 1 : 0;
    episodes.push_back(std::move(ep));
  }

  if (stats != nullptr) *stats = local;
  return episodes;
}

// --- metrics ---

double metric_rmse(const policy::Points2& pred, const policy::Points2& gt) {
  if (pred.rows() != gt.rows()) {
    throw LengthMismatch("rmse requires equally long trajectories");
  }
  if (pred.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    acc += (pred.row(i) - gt.row(i)).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(pred.rows()));
}

double metric_dtw(const policy::Points2& pred, const policy::Points2& gt) {
  const Eigen::Index n = pred.rows(), m = gt.rows();
  if (n == 0 || m == 0) throw LengthMismatch("dtw requires non-empty trajectories");
  auto cost = [&](Eigen::Index i, Eigen::Index j) {
    return (pred.row(i) - gt.row(j)).norm();
  };
  Eigen::MatrixXd table(n, m);
  table(0, 0) = cost(0, 0);
  for (Eigen::Index i = 1; i < n; ++i) table(i, 0) = table(i - 1, 0) + cost(i, 0);
  for (Eigen::Index j = 1; j < m; ++j) table(0, j) = table(0, j - 1) + cost(0, j);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 1; j < m; ++j) {
      table(i, j) = cost(i, j) + std::min({table(i - 1, j), table(i, j - 1),
                                           table(i - 1, j - 1)});
    }
  }
  return table(n - 1, m - 1);
}

RigidTransform2 align_rigid(const policy::Points2& from, const policy::Points2& to) {
  if (from.rows() != to.rows() || from.rows() == 0) {
    throw LengthMismatch("rigid alignment requires paired points");
  }
  const Eigen::RowVector2d cf = from.colwise().mean();
  const Eigen::RowVector2d ct = to.colwise().mean();
  double sin_acc = 0.0, cos_acc = 0.0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    const Eigen::RowVector2d p = from.row(i) - cf;
    const Eigen::RowVector2d q = to.row(i) - ct;
    cos_acc += p.dot(q);
    sin_acc += p.x() * q.y() - p.y() * q.x();
  }
  const double angle = std::atan2(sin_acc, cos_acc);
  RigidTransform2 tf;
  tf.rotation << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  tf.translation = ct.transpose() - tf.rotation * cf.transpose();
  return tf;
}

namespace {

double principal_angle(const policy::Points2& pts) {
  const Eigen::RowVector2d c = pts.colwise().mean();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Eigen::Vector2d d = (pts.row(i) - c).transpose();
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d axis = eig.eigenvectors().col(1);
  return std::atan2(axis.y(), axis.x());
}

policy::Points2 rotate_about_centroid(const policy::Points2& pts, double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const Eigen::RowVector2d c = pts.colwise().mean();
  policy::Points2 out(pts.rows(), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    out.row(i) = (r * (pts.row(i) - c).transpose()).transpose() + c;
  }
  return out;
}

}  // namespace

double metric_icp(const policy::Points2& pred, const policy::Points2& gt,
                  int max_iterations) {
  if (pred.rows() == 0 || gt.rows() == 0) {
    throw LengthMismatch("icp requires non-empty trajectories");
  }

  auto nearest_residual = [&](const policy::Points2& pts, policy::Points2& matched) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      Eigen::Index best = 0;
      double best_d = (gt.row(0) - pts.row(i)).norm();
      for (Eigen::Index j = 1; j < gt.rows(); ++j) {
        const double d = (gt.row(j) - pts.row(i)).norm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      matched.row(i) = gt.row(best);
      acc += best_d;
    }
    return acc / static_cast<double>(pts.rows());
  };

  auto refine = [&](policy::Points2 moved) {
    policy::Points2 matched(moved.rows(), 2);
    double mean_dist = nearest_residual(moved, matched);
    for (int iter = 0; iter < max_iterations; ++iter) {
      const RigidTransform2 tf = align_rigid(moved, matched);
      for (Eigen::Index i = 0; i < moved.rows(); ++i) {
        moved.row(i) =
            (tf.rotation * moved.row(i).transpose() + tf.translation).transpose();
      }
      const double next = nearest_residual(moved, matched);
      if (std::abs(mean_dist - next) < 1e-15) {
        mean_dist = next;
        break;
      }
      mean_dist = next;
    }
    return mean_dist;
  };

  // Centroid shift plus principal-axis pre-rotation; both axis signs are
  // tried since the eigenvector orientation is arbitrary.
  policy::Points2 centered = pred;
  centered.rowwise() += (gt.colwise().mean() - pred.colwise().mean());
  const double spin = principal_angle(gt) - principal_angle(centered);

  double best = refine(centered);
  for (double extra : {spin, spin + M_PI}) {
    best = std::min(best, refine(rotate_about_centroid(centered, extra)));
  }
  return best;
}

double metric_jerk(const policy::Points2& traj, double dt) {
  if (traj.rows() < 4) throw TooShort("jerk needs at least 4 samples");
  const double dt3 = dt * dt * dt;
  double acc = 0.0;
  const Eigen::Index count = traj.rows() - 3;
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::RowVector2d third = traj.row(i + 3) - 3.0 * traj.row(i + 2) +
                                     3.0 * traj.row(i + 1) - traj.row(i);
    acc += (third / dt3).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(count));
}

// --- offline evaluation ---

DiffusionPredictor::DiffusionPredictor(nn::DenseNet net,
                                       policy::NoiseSchedule schedule,
                                       policy::DiffusionConfig cfg)
    : net_(std::move(net)), schedule_(std::move(schedule)), cfg_(cfg) {}

policy::Points2 DiffusionPredictor::predict(const policy::Points2& ball_unit,
                                            const Eigen::Vector2d& chair_unit,
                                            std::uint64_t seed) const {
  const Eigen::VectorXd condition = policy::condition_vector(ball_unit, chair_unit);
  policy::DenoiserFn fn = [this](const Eigen::VectorXd& tau, int step,
                                 const Eigen::VectorXd& cond) {
    Eigen::VectorXd input(tau.size() + cond.size() + cfg_.timestep_embed_dim);
    input << tau, cond, policy::timestep_embedding(step, cfg_.timestep_embed_dim);
    return nn::forward(net_, input);
  };
  policy::SampleOptions options;
  options.seed = seed;
  const Eigen::VectorXd tau = policy::sample_plan_normalized(
      fn, schedule_, condition, chair_unit, cfg_.horizon, options);
  return policy::unflatten_points(tau);
}

OfflineMetrics evaluate_offline(const TrajectoryPredictor& predictor,
                                const std::vector<Episode>& episodes,
                                const OfflineEvalParams& params) {
  OfflineMetrics acc;
  std::uint64_t window_counter = 0;

  for (const Episode& ep : episodes) {
    if (!ep.valid) continue;
    const policy::Points2 ball_unit = params.image_norm.to_unit(ep.ball_image);
    const policy::Points2 chair_unit =
        params.action == policy::ActionSpace::kImage
            ? params.image_norm.to_unit(ep.chair_image)
            : params.court_norm.to_unit(ep.chair_court);

    policy::WindowExtractionParams wep;
    wep.history = params.history;
    wep.horizon = params.horizon;
    wep.stride = params.stride;
    wep.mode = params.mode;
    const auto windows = policy::extract_windows_indexed(ball_unit, chair_unit, wep);
    if (windows.empty()) continue;

    const geometry::Homography h_inv = invert_homography(ep.homography);
    const double frame_dt = 1.0 / ep.fps;

    for (const auto& iw : windows) {
      // Predictions are only meaningful inside the frame; the inverse
      // homography diverges past the ground-plane horizon.
      const policy::Points2 pred_unit =
          predictor
              .predict(iw.window.ball, iw.window.chair,
                       split_seed(params.seed, window_counter++))
              .cwiseMax(-1.0)
              .cwiseMin(1.0);

      policy::Points2 pred_m(pred_unit.rows(), 2);
      if (params.action == policy::ActionSpace::kImage) {
        const policy::Points2 pred_px = params.image_norm.from_unit(pred_unit);
        for (Eigen::Index r = 0; r < pred_px.rows(); ++r) {
          const auto p =
              geometry::apply_homography(h_inv, geometry::ImagePoint{pred_px(r, 0),
                                                                     pred_px(r, 1)});
          pred_m(r, 0) = p.x;
          pred_m(r, 1) = p.y;
        }
      } else {
        pred_m = params.court_norm.from_unit(pred_unit);
      }

      const policy::Points2 gt = ep.chair_court.middleRows(iw.start, params.horizon);
      acc.rmse += metric_rmse(pred_m, gt);
      acc.dtw += metric_dtw(pred_m, gt);
      acc.icp += metric_icp(pred_m, gt);
      acc.jerk += metric_jerk(pred_m, frame_dt);
      acc.windows++;
    }
  }

  if (acc.windows == 0) {
    throw NoValidWindows("no evaluation windows could be extracted");
  }
  const double n = acc.windows;
  acc.rmse /= n;
  acc.dtw /= n;
  acc.icp /= n;
  acc.jerk /= n;
  return acc;
}

// --- closed loop ---

ImitationPlanner::ImitationPlanner(
    std::shared_ptr<const TrajectoryPredictor> predictor,
    policy::ConditionMode mode, policy::ActionSpace action,
    policy::Normalizer image_norm, policy::Normalizer court_norm,
    CourtGeometry court, double fps, double replan_period)
    : predictor_(std::move(predictor)),
      mode_(mode),
      action_(action),
      image_norm_(image_norm),
      court_norm_(court_norm),
      court_(court),
      fps_(fps),
      replan_period_(replan_period) {}

control::LocalPlan ImitationPlanner::plan(const PlanRequest& request,
                                          std::uint64_t seed) const {
  const policy::Points2 ball_unit = image_norm_.to_unit(request.ball_window_px);
  const Eigen::Vector2d chair_unit =
      action_ == policy::ActionSpace::kImage
          ? image_norm_.to_unit(request.chair_px)
          : court_norm_.to_unit(Eigen::Vector2d(request.chair.x, request.chair.y));

  const policy::Points2 pred_unit =
      predictor_->predict(ball_unit, chair_unit, seed).cwiseMax(-1.0).cwiseMin(1.0);

  control::LocalPlan plan;
  plan.created_at = request.t_now;
  plan.waypoint_spacing = 1.0 / fps_;
  plan.replan_period = replan_period_;
  plan.waypoints.resize(static_cast<std::size_t>(pred_unit.rows()));

  std::optional<geometry::Homography> h_inv;
  if (action_ == policy::ActionSpace::kImage) {
    h_inv = invert_homography(request.episode->homography);
  }
  for (Eigen::Index r = 0; r < pred_unit.rows(); ++r) {
    geometry::CourtPoint p;
    if (action_ == policy::ActionSpace::kImage) {
      const Eigen::Vector2d px =
          image_norm_.from_unit(Eigen::Vector2d(pred_unit.row(r).transpose()));
      p = geometry::apply_homography(*h_inv, geometry::ImagePoint{px.x(), px.y()});
    } else {
      const Eigen::Vector2d m =
          court_norm_.from_unit(Eigen::Vector2d(pred_unit.row(r).transpose()));
      p = {m.x(), m.y()};
    }
    plan.waypoints[static_cast<std::size_t>(r)] = clamp_to_court(p, court_);
  }
  plan.waypoints[0] = {request.chair.x, request.chair.y};
  return plan;
}

TebPlanner::TebPlanner(CourtGeometry court, double v_max_plan, double replan_period)
    : court_(court), v_max_plan_(v_max_plan), replan_period_(replan_period) {}

control::LocalPlan TebPlanner::plan(const PlanRequest& request,
                                    std::uint64_t /*seed*/) const {
  const ExpertTarget target =
      scripted_expert(request.ball_prediction, request.chair, v_max_plan_);
  control::LocalPlan plan;
  plan.created_at = request.t_now;
  plan.waypoint_spacing = 1.0 / 30.0;
  plan.replan_period = replan_period_;
  plan.waypoints = {clamp_to_court(target.point, court_)};
  return plan;
}

namespace {

struct EpisodeRun {
  EpisodeResult result;
  EpisodeTrace trace;
  int solves{0};
  int failures{0};
  double err_sum{0.0};
  double err_max{0.0};
};

struct Belief {
  dynamics::BallState3 state;
  double t{0.0};
  bool valid{false};
};

void advance_belief(Belief& belief, double t, const dynamics::BallParams& params,
                    double dt) {
  while (belief.t + dt <= t + 1e-9) {
    belief.state = dynamics::step_ball(belief.state, params, dt);
    belief.t += dt;
  }
}

EpisodeRun simulate_episode(const ClosedLoopPlanner& planner, const Episode& ep,
                            const ClosedLoopParams& cfg) {
  EpisodeRun run;
  run.trace.episode_id = ep.id;
  const double dt = cfg.control_dt;
  const double frame_dt = 1.0 / ep.fps;
  const std::uint64_t ep_seed = split_seed(cfg.seed, ep.id * 2654435761ULL + 17);

  // Dense ground truth reconstructed from the recorded initial state; the
  // recorded frames are samples of this same rollout.
  dynamics::BallState3 b0;
  b0.pos = ep.ball_court.row(0).transpose();
  b0.vel = ep.ball_vel.row(0).transpose();
  b0.bounce_count = ep.ball_bounce(0);
  auto truth = dynamics::rollout_ball(b0, cfg.ball, 6.0, dt);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].state.bounce_count >= cfg.max_bounces) {
      truth.resize(i + 1);
      break;
    }
  }

  std::vector<perception::Detection> detections;
  if (cfg.perception == PerceptionMode::kLive) {
    if (cfg.rig.cameras.empty()) {
      throw Error("live perception requires a camera rig");
    }
    detections = perception::synthesize_detections(truth, cfg.rig,
                                                   split_seed(ep_seed, 101));
  }

  dynamics::WheelchairState chair;
  chair.x = ep.chair_court(0, 0);
  chair.y = ep.chair_court(0, 1);
  chair.theta = M_PI;

  control::WaypointTracker tracker(cfg.gains);
  std::optional<control::LocalPlan> plan;
  Belief belief;
  std::vector<Eigen::Vector2d> past_px;  // observed ball pixels at frame times
  std::vector<dynamics::TimedBallState> prediction;

  int next_frame = 0;
  double next_replan = 0.0;
  int replan_count = 0;

  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double t = truth[k].t;
    const auto& ball = truth[k].state;

    if (k == tick_of_frame(next_frame, frame_dt, dt)) {
      ++next_frame;
      if (cfg.perception == PerceptionMode::kHybrid) {
        const auto px = geometry::project_point(ep.camera, ball.pos);
        past_px.push_back({px.u, px.v});
      } else if (belief.valid) {
        advance_belief(belief, t, cfg.ball, dt);
        try {
          const auto px = geometry::project_point(ep.camera, belief.state.pos);
          past_px.push_back({px.u, px.v});
        } catch (const geometry::BehindCamera&) {
        }
      }
    }

    if (t + 1e-9 >= next_replan) {
      next_replan += cfg.replan_period;
      ++replan_count;

      bool can_plan = true;
      if (cfg.perception == PerceptionMode::kHybrid) {
        prediction = dynamics::rollout_ball(ball, cfg.ball, cfg.prediction_horizon, dt);
        for (auto& s : prediction) s.t += t;
      } else {
        // Sliding-window estimate; a misfit (e.g. a bounce inside the
        // window) triggers one retry on the newest half of the window.
        double window = cfg.estimator_window;
        bool solved = false;
        for (int attempt = 0; attempt < 2 && !solved; ++attempt, window *= 0.5) {
          std::vector<perception::Detection> win;
          for (const auto& d : detections) {
            if (d.t >= t - window && d.t <= t + 1e-9) win.push_back(d);
          }
          try {
            const auto details = perception::estimate_ball_state_detailed(
                win, cfg.rig, cfg.ball, t);
            const double rms = std::sqrt(
                details.final_cost / std::max<std::size_t>(1, 2 * win.size()));
            const double gate = 3.0 * cfg.rig.pixel_noise_sigma + 2.0;
            if (rms <= gate) {
              belief = {details.state, t, true};
              solved = true;
              run.solves++;
              const double err = (details.state.pos - ball.pos).norm();
              run.err_sum += err;
              run.err_max = std::max(run.err_max, err);
            }
          } catch (const Error&) {
          }
        }
        if (!solved) run.failures++;
        if (belief.valid) {
          advance_belief(belief, t, cfg.ball, dt);
          prediction =
              dynamics::rollout_ball(belief.state, cfg.ball, cfg.prediction_horizon, dt);
          for (auto& s : prediction) s.t += t;
        } else {
          can_plan = false;
        }
      }

      if (can_plan) {
        PlanRequest req;
        req.chair = chair;
        const auto chair_px =
            geometry::apply_homography(ep.homography,
                                       geometry::CourtPoint{chair.x, chair.y});
        req.chair_px = Eigen::Vector2d(chair_px.u, chair_px.v);
        req.t_now = t;
        req.episode = &ep;
        req.ball_prediction = prediction;

        req.ball_window_px.resize(cfg.history, 2);
        if (planner.condition_mode() == policy::ConditionMode::kPre2D) {
          if (past_px.empty()) {
            can_plan = false;
          } else {
            for (int j = 0; j < cfg.history; ++j) {
              const std::ptrdiff_t idx =
                  std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(past_px.size()) -
                                                  cfg.history + j);
              req.ball_window_px.row(j) = past_px[static_cast<std::size_t>(idx)];
            }
          }
        } else {
          Eigen::Vector2d last{0.0, 0.0};
          bool have_last = false;
          for (int j = 1; j <= cfg.history; ++j) {
            std::size_t idx = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(prediction.size()) - 1,
                                         std::lround(j * frame_dt / dt)));
            try {
              const auto px =
                  geometry::project_point(ep.camera, prediction[idx].state.pos);
              last = {px.u, px.v};
              have_last = true;
            } catch (const geometry::BehindCamera&) {
            }
            if (!have_last) {
              const auto px = geometry::project_point(ep.camera, ball.pos);
              last = {px.u, px.v};
              have_last = true;
            }
            req.ball_window_px.row(j - 1) = last;
          }
        }

        if (can_plan) {
          plan = planner.plan(req, split_seed(ep_seed, static_cast<std::uint64_t>(
                                                           replan_count)));
        }
      }
    }

    control::PdCommand cmd;
    if (plan.has_value() && !plan->waypoints.empty()) {
      cmd = tracker.command(*plan, chair, t);
    }
    const auto [vl, vr] = dynamics::twist_to_wheels(cmd.v, cmd.omega, kTrackWidth);
    run.trace.ticks.push_back(
        {t, ball.pos, ball.bounce_count, chair, cmd.v, cmd.omega, vl, vr});
    chair = dynamics::step_wheelchair(chair, cmd.v, cmd.omega, dt);
  }

  run.result = score_trace(run.trace, cfg.success_radius, cfg.max_bounces);
  return run;
}

}  // namespace

int ClosedLoopOutcome::successes() const {
  int n = 0;
  for (const auto& r : results) n += r.success ? 1 : 0;
  return n;
}

double ClosedLoopOutcome::success_rate() const {
  return results.empty() ? 0.0
                         : static_cast<double>(successes()) /
                               static_cast<double>(results.size());
}

ClosedLoopOutcome run_closed_loop(const ClosedLoopPlanner& planner,
                                  const std::vector<Episode>& episodes,
                                  const ClosedLoopParams& params) {
  std::vector<EpisodeRun> runs(episodes.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= episodes.size()) break;
      runs[i] = simulate_episode(planner, episodes[i], params);
    }
  };

  const int jobs = std::max(1, std::min<int>(params.jobs,
                                             static_cast<int>(episodes.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ClosedLoopOutcome outcome;
  for (auto& run : runs) {
    outcome.results.push_back(run.result);
    outcome.live.solves += run.solves;
    outcome.live.failures += run.failures;
    outcome.live.mean_position_error += run.err_sum;
    outcome.live.max_position_error =
        std::max(outcome.live.max_position_error, run.err_max);
    if (params.keep_traces) outcome.traces.push_back(std::move(run.trace));
  }
  if (outcome.live.solves > 0) {
    outcome.live.mean_position_error /= outcome.live.solves;
  }
  return outcome;
}

EpisodeResult score_trace(const EpisodeTrace& trace, double success_radius,
                          int max_bounces) {
  EpisodeResult result;
  result.episode_id = trace.episode_id;
  result.min_distance = std::numeric_limits<double>::infinity();
  for (const auto& tick : trace.ticks) {
    if (tick.ball_bounce >= max_bounces) break;
    const double d = std::hypot(tick.ball_pos.x() - tick.chair.x,
                                tick.ball_pos.y() - tick.chair.y);
    if (d < result.min_distance) {
      result.min_distance = d;
      result.bounces_at_min = tick.ball_bounce;
    }
  }
  result.success = result.min_distance < success_radius;
  return result;
}

std::pair<double, double> wilson_interval(int successes, int trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = trials;
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace imit2d::harness
