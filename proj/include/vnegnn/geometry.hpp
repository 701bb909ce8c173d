#pragma once

#include "vnegnn/rng.hpp"
#include "vnegnn/types.hpp"

namespace vnegnn::geom {

// Orthogonal map plus shift. `improper` is true iff det(rotation) < 0,
// i.e. the map includes a reflection.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  bool improper = false;

  void validate(double tol = 1e-10) const;
  static RigidTransform identity() { return {}; }
};

// K points on a sphere; one point per row.
struct SphereGrid {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  Points points;
};

// Golden-angle spiral: z_i = 1 - (2i+1)/k, azimuth_i = i*pi*(3-sqrt(5)),
// scaled by radius and shifted by center. Deterministic in (k, center, radius).
SphereGrid fibonacci_grid(int k, const Vec3& center, double radius);

// Haar-uniform rotation (no reflection, no translation).
RigidTransform random_rotation(Rng& rng);

// Uniform element of E(3): Haar rotation, reflection with probability 1/2,
// translation drawn from [-shift, shift]^3.
RigidTransform random_rigid_transform(Rng& rng, double shift = 10.0,
                                      bool allow_reflection = true);

// Maps each row x to R*x + t.
Points apply_transform(const RigidTransform& t, const Points& pts);

// Rotates `pts` about `pivot` (R*(x - pivot) + pivot).
Points rotate_about(const Mat3& rotation, const Vec3& pivot, const Points& pts);

Vec3 centroid(const Points& pts);

}  // namespace vnegnn::geom
