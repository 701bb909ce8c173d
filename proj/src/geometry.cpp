#include "vnegnn/geometry.hpp"

#include <cmath>

#include "vnegnn/errors.hpp"

namespace vnegnn::geom {

void RigidTransform::validate(double tol) const {
  Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    throw ArgumentError("RigidTransform: rotation is not orthogonal");
  double det = rotation.determinant();
  if (std::abs(std::abs(det) - 1.0) > tol)
    throw ArgumentError("RigidTransform: |det| != 1");
  if (improper != (det < 0.0))
    throw ArgumentError("RigidTransform: improper flag disagrees with det");
}

SphereGrid fibonacci_grid(int k, const Vec3& center, double radius) {
  if (k < 1) throw ArgumentError("fibonacci_grid: k must be >= 1");
  if (radius <= 0.0) throw ArgumentError("fibonacci_grid: radius must be > 0");
  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  SphereGrid grid;
  grid.center = center;
  grid.radius = radius;
  grid.points.resize(k, 3);
  for (int i = 0; i < k; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(k);
    double r_xy = std::sqrt(std::max(0.0, 1.0 - z * z));
    double azimuth = golden_angle * static_cast<double>(i);
    Vec3 unit(r_xy * std::cos(azimuth), r_xy * std::sin(azimuth), z);
    grid.points.row(i) = (center + radius * unit).transpose();
  }
  return grid;
}

RigidTransform random_rotation(Rng& rng) {
  // Uniform unit quaternion -> rotation matrix.
  double q[4];
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& c : q) {
      c = rng.gaussian();
      norm2 += c * c;
    }
  } while (norm2 < 1e-12);
  double inv = 1.0 / std::sqrt(norm2);
  double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  RigidTransform t;
  t.rotation << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return t;
}

RigidTransform random_rigid_transform(Rng& rng, double shift,
                                      bool allow_reflection) {
  RigidTransform t = random_rotation(rng);
  if (allow_reflection && rng.uniform() < 0.5) {
    t.rotation.col(0) *= -1.0;
    t.improper = true;
  }
  for (int d = 0; d < 3; ++d) t.translation[d] = rng.uniform(-shift, shift);
  return t;
}

Points apply_transform(const RigidTransform& t, const Points& pts) {
  Points out = pts * t.rotation.transpose();
  out.rowwise() += t.translation.transpose();
  return out;
}

Points rotate_about(const Mat3& rotation, const Vec3& pivot, const Points& pts) {
  Points out = pts;
  out.rowwise() -= pivot.transpose();
  out = out * rotation.transpose();
  out.rowwise() += pivot.transpose();
  return out;
}

Vec3 centroid(const Points& pts) {
  return pts.colwise().mean().transpose();
}

}  // namespace vnegnn::geom
