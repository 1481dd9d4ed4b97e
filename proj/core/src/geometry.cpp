#include "imit2d/geometry.hpp"

#include <cmath>

namespace imit2d::geometry {
namespace {

Eigen::Matrix3d canonical_scale(Eigen::Matrix3d m) {
  const double fro = m.norm();
  if (!(fro > 0.0) || !m.allFinite()) {
    throw SingularMatrix("homography has zero or non-finite entries");
  }
  m /= fro;
  if (std::abs(m(2, 2)) > 1e-6) {
    m /= m(2, 2);
  } else {
    // Frobenius-normalized fallback; pin the sign of the largest entry.
    Eigen::Index r, c;
    m.cwiseAbs().maxCoeff(&r, &c);
    if (m(r, c) < 0.0) m = -m;
  }
  return m;
}

struct NormalizingTransform {
  Eigen::Matrix3d t;  // similarity mapping raw points to conditioned ones
};

// Hartley conditioning: centroid at the origin, mean distance sqrt(2).
NormalizingTransform hartley_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());

  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist < 1e-12) {
    throw DegenerateConfiguration("all correspondence points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;

  NormalizingTransform out;
  out.t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return out;
}

}  // namespace

Homography::Homography(const Eigen::Matrix3d& m) : m_(canonical_scale(m)) {
  if (std::abs(m_.determinant()) < 1e-12) {
    throw SingularMatrix("homography matrix is singular");
  }
}

void validate_camera(const CameraModel& cam) {
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) {
    throw Error("camera focal lengths must be positive");
  }
  const Eigen::Matrix3d gram = cam.rotation.transpose() * cam.rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw Error("camera rotation is not orthonormal");
  }
}

CameraModel make_look_at_camera(const Eigen::Vector3d& eye,
                                const Eigen::Vector3d& target, double fx,
                                double fy, double cx, double cy) {
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) {
    right = Eigen::Vector3d(0.0, 1.0, 0.0);  // looking straight up/down
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right).normalized();

  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.rotation.row(0) = right;
  cam.rotation.row(1) = down;
  cam.rotation.row(2) = forward;
  cam.translation = -cam.rotation * eye;
  validate_camera(cam);
  return cam;
}

Homography estimate_homography(
    const std::vector<std::pair<CourtPoint, ImagePoint>>& correspondences) {
  const std::size_t n = correspondences.size();
  if (n < 4) {
    throw TooFewPoints("homography estimation needs at least 4 points");
  }

  std::vector<Eigen::Vector2d> court(n), image(n);
  for (std::size_t i = 0; i < n; ++i) {
    court[i] = {correspondences[i].first.x, correspondences[i].first.y};
    image[i] = {correspondences[i].second.u, correspondences[i].second.v};
  }
  const auto tc = hartley_transform(court);
  const auto ti = hartley_transform(image);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = tc.t * Eigen::Vector3d(court[i].x(), court[i].y(), 1.0);
    const Eigen::Vector3d q = ti.t * Eigen::Vector3d(image[i].x(), image[i].y(), 1.0);
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    a.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
  }

  const Eigen::Matrix<double, 9, 9> ata = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  if (eig.info() != Eigen::Success) {
    throw DegenerateConfiguration("eigen-decomposition of the DLT normal matrix failed");
  }
  // Nullspace of dimension >= 2 means the points do not pin down a
  // unique map (e.g. collinear configurations).
  const double scale = std::max(eig.eigenvalues()(8), 1.0);
  if (eig.eigenvalues()(1) < 1e-10 * scale) {
    throw DegenerateConfiguration("DLT design matrix is rank-deficient");
  }

  Eigen::Matrix3d h_cond;
  const Eigen::Matrix<double, 9, 1> hv = eig.eigenvectors().col(0);
  h_cond << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);

  const Eigen::Matrix3d h = ti.t.inverse() * h_cond * tc.t;
  try {
    return Homography(h);
  } catch (const SingularMatrix&) {
    throw DegenerateConfiguration("DLT solution is singular");
  }
}

ImagePoint apply_homography(const Homography& h, const CourtPoint& p) {
  const Eigen::Vector3d q = h.matrix() * Eigen::Vector3d(p.x, p.y, 1.0);
  if (std::abs(q.z()) < 1e-12) {
    throw PointAtInfinity("point maps to infinity under homography");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

CourtPoint apply_homography(const Homography& h, const ImagePoint& p) {
  const Eigen::Vector3d q = h.matrix() * Eigen::Vector3d(p.u, p.v, 1.0);
  if (std::abs(q.z()) < 1e-12) {
    throw PointAtInfinity("point maps to infinity under homography");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography invert_homography(const Homography& h) {
  if (std::abs(h.matrix().determinant()) < 1e-12) {
    throw SingularMatrix("homography matrix is singular");
  }
  return Homography(h.matrix().inverse());
}

ImagePoint project_point(const CameraModel& cam, const Eigen::Vector3d& p) {
  const Eigen::Vector3d pc = cam.rotation * p + cam.translation;
  if (pc.z() <= 1e-9) {
    throw BehindCamera("point has non-positive depth in camera frame");
  }
  return {cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy};
}

Homography ground_plane_homography(const CameraModel& cam) {
  Eigen::Matrix3d k;
  k << cam.fx, 0, cam.cx, 0, cam.fy, cam.cy, 0, 0, 1;
  Eigen::Matrix3d rt;
  rt.col(0) = cam.rotation.col(0);
  rt.col(1) = cam.rotation.col(1);
  rt.col(2) = cam.translation;
  return Homography(k * rt);
}

}  // namespace imit2d::geometry
