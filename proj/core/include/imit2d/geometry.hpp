#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "imit2d/common.hpp"

namespace imit2d::geometry {

struct TooFewPoints : Error {
  using Error::Error;
};
struct DegenerateConfiguration : Error {
  using Error::Error;
};
struct PointAtInfinity : Error {
  using Error::Error;
};
struct SingularMatrix : Error {
  using Error::Error;
};
struct BehindCamera : Error {
  using Error::Error;
};

// Point on the court ground plane, meters.
struct CourtPoint {
  double x{0.0};
  double y{0.0};
};

// Pixel position in the broadcast image frame.
struct ImagePoint {
  double u{0.0};
  double v{0.0};
};

// Invertible 3x3 projective map between the court ground plane and the
// image plane. Stored in a canonical scale: bottom-right entry fixed to 1
// when it is not vanishingly small, unit Frobenius norm otherwise, so two
// estimates of the same map compare entrywise.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Homography(const Eigen::Matrix3d& m);

  const Eigen::Matrix3d& matrix() const { return m_; }

 private:
  Eigen::Matrix3d m_;
};

// Pinhole camera. `rotation` maps world to camera axes (x right, y down,
// z forward); camera-frame point of X is rotation * X + translation.
struct CameraModel {
  double fx{1.0};
  double fy{1.0};
  double cx{0.0};
  double cy{0.0};
  Eigen::Matrix3d rotation{Eigen::Matrix3d::Identity()};
  Eigen::Vector3d translation{Eigen::Vector3d::Zero()};
};

// Throws Error unless fx,fy > 0 and rotation is orthonormal within 1e-9.
void validate_camera(const CameraModel& cam);

// Camera at `eye` looking toward `target`, world +z up, image v downward.
CameraModel make_look_at_camera(const Eigen::Vector3d& eye,
                                const Eigen::Vector3d& target, double fx,
                                double fy, double cx, double cy);

// Least-squares DLT fit from court/pixel correspondences (Hartley
// normalization, smallest eigenvector of the 9x9 normal matrix).
Homography estimate_homography(
    const std::vector<std::pair<CourtPoint, ImagePoint>>& correspondences);

ImagePoint apply_homography(const Homography& h, const CourtPoint& p);

// Same projective action for maps going the other way (image -> court),
// e.g. the result of invert_homography.
CourtPoint apply_homography(const Homography& h, const ImagePoint& p);

Homography invert_homography(const Homography& h);

// Pinhole projection of a world point with positive camera-frame depth.
ImagePoint project_point(const CameraModel& cam, const Eigen::Vector3d& p);

// The homography the camera induces on the z=0 plane: K [r1 r2 t].
// Applying it to (x, y) matches project_point on (x, y, 0).
Homography ground_plane_homography(const CameraModel& cam);

}  // namespace imit2d::geometry
