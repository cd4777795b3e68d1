#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lmp/error.hpp"

namespace lmp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// First two columns of a rotation matrix, before orthonormalization.
// The continuous rotation representation used throughout the model.
struct Rot6D {
  Vec3 a = Vec3(1, 0, 0);
  Vec3 b = Vec3(0, 1, 0);

  static Rot6D identity() { return Rot6D{}; }

  Eigen::Matrix<double, 6, 1> flat() const {
    Eigen::Matrix<double, 6, 1> v;
    v << a, b;
    return v;
  }
  static Rot6D from_flat(const Eigen::Ref<const Eigen::Matrix<double, 6, 1>>& v) {
    return Rot6D{v.head<3>(), v.tail<3>()};
  }
};

struct RigidTransform {
  Rot6D rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return RigidTransform{}; }
};

// Gram-Schmidt: c1 = normalize(a), c2 = normalize(b - (c1.b)c1), c3 = c1 x c2.
// Throws DegenerateInput when a is near zero or b is near collinear with a.
Mat3 rot6d_to_matrix(const Rot6D& r);

// First two columns of R. Throws InvalidRotation when R is not orthonormal
// with determinant +1 within 1e-5.
Rot6D matrix_to_rot6d(const Mat3& R);

// Componentwise weighted mean in 6D space. Orthonormalization is deferred to
// rot6d_to_matrix; blending stays linear.
Rot6D blend_rot6d(const std::vector<double>& weights, const std::vector<Rot6D>& rots);

// Applies rho to a root rotation and a displacement:
//   theta' = R_rho * theta (in 6D this rotates both columns),
//   gamma' = R_rho * gamma + t_rho.
// Non-root joints are not touched by rho.
std::pair<Rot6D, Vec3> apply_rigid(const RigidTransform& rho, const Rot6D& theta_root,
                                   const Vec3& gamma);

// Composition: result applies first then second.
RigidTransform compose_rigid(const RigidTransform& second, const RigidTransform& first);

bool is_rotation_matrix(const Mat3& R, double tol);

}  // namespace lmp
