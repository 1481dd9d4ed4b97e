#pragma once

#include <cstdint>
#include <vector>

#include "imit2d/dynamics.hpp"
#include "imit2d/geometry.hpp"

namespace imit2d::perception {

struct InsufficientObservations : Error {
  using Error::Error;
};
struct DivergedSolve : Error {
  using Error::Error;
};

struct Detection {
  int camera_id{0};
  double t{0.0};
  geometry::ImagePoint px;
  bool valid{true};
};

struct CameraRig {
  std::vector<geometry::CameraModel> cameras;
  double pixel_noise_sigma{1.0};  // px
  double dropout_prob{0.0};       // in [0, 1)
};

// Projects every trajectory sample into every camera that sees it
// (positive depth), drops each with dropout_prob, and perturbs the pixel
// with isotropic Gaussian noise. Deterministic for a fixed seed.
std::vector<Detection> synthesize_detections(
    const std::vector<dynamics::TimedBallState>& traj, const CameraRig& rig,
    std::uint64_t seed);

struct EstimatorOptions {
  double jacobian_step{1e-5};
  int max_iterations{50};
  double step_tol{1e-8};
  int max_backtracks{20};
  int max_cost_increases{5};
  double integration_dt{0.005};
};

struct EstimateDetails {
  dynamics::BallState3 state;          // at t_ref
  std::vector<double> cost_history;    // accepted-iterate costs, px^2
  int iterations{0};
  double final_cost{0.0};
};

// Batch Gauss-Newton fit of (position, velocity) at the window start,
// integrating the flight model to each detection time and minimizing the
// summed squared reprojection error. Jacobians are central differences.
// The returned state is propagated to t_ref (>= window start).
EstimateDetails estimate_ball_state_detailed(
    std::vector<Detection> detections, const CameraRig& rig,
    const dynamics::BallParams& params, double t_ref,
    const EstimatorOptions& options = {});

dynamics::BallState3 estimate_ball_state(std::vector<Detection> detections,
                                         const CameraRig& rig,
                                         const dynamics::BallParams& params,
                                         double t_ref,
                                         const EstimatorOptions& options = {});

}  // namespace imit2d::perception
