#pragma once

#include <Eigen/Dense>
#include <random>

#include "imit2d/geometry.hpp"

namespace imit2d::testutil {

// Well-conditioned random homography: near-affine with a mild projective
// part, resampled until the determinant is comfortably nonzero.
inline geometry::Homography random_homography(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> small(-0.3, 0.3);
  std::uniform_real_distribution<double> proj(-0.05, 0.05);
  for (;;) {
    Eigen::Matrix3d m;
    m << 1.0 + small(rng), small(rng), 2.0 * small(rng),
        small(rng), 1.0 + small(rng), 2.0 * small(rng),
        proj(rng), proj(rng), 1.0;
    if (std::abs(m.determinant()) > 0.2) return geometry::Homography(m);
  }
}

inline Eigen::Vector2d random_point(std::mt19937_64& rng, double lo = -2.0,
                                    double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return {dist(rng), dist(rng)};
}

}  // namespace imit2d::testutil
