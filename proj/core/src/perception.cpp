#include "imit2d/perception.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace imit2d::perception {
namespace {

using dynamics::BallParams;
using dynamics::BallState3;

// Positions of the flight model at the given step counts on a fixed
// integration grid anchored at the window start. Using step_ball keeps
// the estimator's model identical to the simulator's.
std::vector<Eigen::Vector3d> positions_at_steps(const BallState3& start,
                                                const BallParams& params,
                                                const std::vector<int>& steps,
                                                double dt) {
  std::vector<Eigen::Vector3d> out(steps.size());
  BallState3 cur = start;
  int done = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    while (done < steps[i]) {
      cur = dynamics::step_ball(cur, params, dt);
      ++done;
    }
    out[i] = cur.pos;
  }
  return out;
}

Eigen::VectorXd residuals(const Eigen::Matrix<double, 6, 1>& theta,
                          const std::vector<Detection>& dets,
                          const std::vector<int>& steps,
                          const CameraRig& rig, const BallParams& params,
                          double dt) {
  BallState3 start;
  start.pos = theta.head<3>();
  start.vel = theta.tail<3>();
  const auto pos = positions_at_steps(start, params, steps, dt);

  Eigen::VectorXd r(2 * static_cast<Eigen::Index>(dets.size()));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& cam = rig.cameras[static_cast<std::size_t>(dets[i].camera_id)];
    double u, v;
    try {
      const auto px = geometry::project_point(cam, pos[i]);
      u = px.u;
      v = px.v;
    } catch (const geometry::BehindCamera&) {
      // Large but finite penalty keeps the solve smooth enough to back off.
      u = dets[i].px.u + 1e4;
      v = dets[i].px.v + 1e4;
    }
    r(2 * static_cast<Eigen::Index>(i)) = u - dets[i].px.u;
    r(2 * static_cast<Eigen::Index>(i) + 1) = v - dets[i].px.v;
  }
  return r;
}

// Ray-constraint linear initialization under a drag-free ballistic
// model: (I - d d^T)(p0 + v0 tau) = (I - d d^T)(C + g tau^2/2 e_z).
Eigen::Matrix<double, 6, 1> linear_init(const std::vector<Detection>& dets,
                                        const CameraRig& rig,
                                        const BallParams& params, double t0) {
  const Eigen::Index rows = 3 * static_cast<Eigen::Index>(dets.size());
  Eigen::MatrixXd a(rows, 6);
  Eigen::VectorXd b(rows);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& cam = rig.cameras[static_cast<std::size_t>(dets[i].camera_id)];
    const Eigen::Vector3d dir_cam((dets[i].px.u - cam.cx) / cam.fx,
                                  (dets[i].px.v - cam.cy) / cam.fy, 1.0);
    const Eigen::Vector3d d = (cam.rotation.transpose() * dir_cam).normalized();
    const Eigen::Vector3d center = -cam.rotation.transpose() * cam.translation;
    const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - d * d.transpose();
    const double tau = dets[i].t - t0;
    const Eigen::Vector3d rhs =
        proj * (center + Eigen::Vector3d(0, 0, 0.5 * params.gravity * tau * tau));
    a.block<3, 3>(3 * static_cast<Eigen::Index>(i), 0) = proj;
    a.block<3, 3>(3 * static_cast<Eigen::Index>(i), 3) = tau * proj;
    b.segment<3>(3 * static_cast<Eigen::Index>(i)) = rhs;
  }
  const Eigen::Matrix<double, 6, 6> ata = a.transpose() * a;
  const Eigen::Matrix<double, 6, 1> atb = a.transpose() * b;
  Eigen::Matrix<double, 6, 1> theta = ata.ldlt().solve(atb);
  if (!theta.allFinite()) theta.setZero();
  return theta;
}

}  // namespace

std::vector<Detection> synthesize_detections(
    const std::vector<dynamics::TimedBallState>& traj, const CameraRig& rig,
    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Detection> out;
  for (const auto& sample : traj) {
    for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
      geometry::ImagePoint px;
      try {
        px = geometry::project_point(rig.cameras[c], sample.state.pos);
      } catch (const geometry::BehindCamera&) {
        continue;
      }
      if (uniform(rng) < rig.dropout_prob) continue;
      if (rig.pixel_noise_sigma > 0.0) {
        px.u += rig.pixel_noise_sigma * gauss(rng);
        px.v += rig.pixel_noise_sigma * gauss(rng);
      }
      out.push_back({static_cast<int>(c), sample.t, px, true});
    }
  }
  return out;
}

EstimateDetails estimate_ball_state_detailed(std::vector<Detection> detections,
                                             const CameraRig& rig,
                                             const dynamics::BallParams& params,
                                             double t_ref,
                                             const EstimatorOptions& options) {
  std::erase_if(detections, [](const Detection& d) { return !d.valid; });

  std::set<int> cameras;
  std::set<double> times;
  for (const auto& d : detections) {
    if (d.camera_id < 0 ||
        static_cast<std::size_t>(d.camera_id) >= rig.cameras.size()) {
      throw Error("detection references an unknown camera");
    }
    cameras.insert(d.camera_id);
    times.insert(d.t);
  }
  if (detections.size() < 6 || (cameras.size() < 2 && times.size() < 4)) {
    throw InsufficientObservations(
        "need >= 6 detections spanning >= 2 cameras or >= 4 timestamps");
  }

  // Canonical order makes the solve independent of stream interleaving.
  std::sort(detections.begin(), detections.end(),
            [](const Detection& a, const Detection& b) {
              if (a.t != b.t) return a.t < b.t;
              if (a.camera_id != b.camera_id) return a.camera_id < b.camera_id;
              return a.px.u < b.px.u;
            });

  const double t0 = detections.front().t;
  std::vector<int> steps(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    steps[i] = static_cast<int>(
        std::lround((detections[i].t - t0) / options.integration_dt));
  }

  Eigen::Matrix<double, 6, 1> theta = linear_init(detections, rig, params, t0);

  auto cost_of = [&](const Eigen::Matrix<double, 6, 1>& th) {
    return residuals(th, detections, steps, rig, params, options.integration_dt)
        .squaredNorm();
  };

  EstimateDetails details;
  double cost = cost_of(theta);
  details.cost_history.push_back(cost);

  int consecutive_increases = 0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    details.iterations = iter + 1;
    const Eigen::VectorXd r =
        residuals(theta, detections, steps, rig, params, options.integration_dt);

    Eigen::MatrixXd jac(r.size(), 6);
    for (int k = 0; k < 6; ++k) {
      Eigen::Matrix<double, 6, 1> plus = theta, minus = theta;
      plus(k) += options.jacobian_step;
      minus(k) -= options.jacobian_step;
      jac.col(k) =
          (residuals(plus, detections, steps, rig, params, options.integration_dt) -
           residuals(minus, detections, steps, rig, params, options.integration_dt)) /
          (2.0 * options.jacobian_step);
    }

    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * r;
    Eigen::Matrix<double, 6, 1> delta = jtj.ldlt().solve(-jtr);
    if (!delta.allFinite()) {
      throw DivergedSolve("normal-equation solve produced non-finite step");
    }

    bool accepted = false;
    double applied_norm = 0.0;
    for (int half = 0; half <= options.max_backtracks; ++half) {
      const Eigen::Matrix<double, 6, 1> cand = theta + delta;
      const double cand_cost = cost_of(cand);
      if (cand_cost <= cost) {
        theta = cand;
        cost = cand_cost;
        applied_norm = delta.norm();
        accepted = true;
        break;
      }
      delta *= 0.5;
    }

    if (!accepted) {
      if (++consecutive_increases >= options.max_cost_increases) {
        throw DivergedSolve("cost failed to decrease repeatedly");
      }
      continue;
    }
    consecutive_increases = 0;
    details.cost_history.push_back(cost);
    if (applied_norm < options.step_tol) break;
  }

  BallState3 fitted;
  fitted.pos = theta.head<3>();
  fitted.vel = theta.tail<3>();

  // Propagate to the requested reference time on the same grid.
  const int ref_steps =
      std::max(0, static_cast<int>(std::lround((t_ref - t0) / options.integration_dt)));
  BallState3 at_ref = fitted;
  for (int i = 0; i < ref_steps; ++i) {
    at_ref = dynamics::step_ball(at_ref, params, options.integration_dt);
  }
  details.state = at_ref;
  details.final_cost = cost;
  return details;
}

dynamics::BallState3 estimate_ball_state(std::vector<Detection> detections,
                                         const CameraRig& rig,
                                         const dynamics::BallParams& params,
                                         double t_ref,
                                         const EstimatorOptions& options) {
  return estimate_ball_state_detailed(std::move(detections), rig, params, t_ref,
                                      options)
      .state;
}

}  // namespace imit2d::perception
