#include "lmp/rotation.hpp"

namespace lmp {

namespace {
constexpr double kDegenerateTol = 1e-8;
}

Mat3 rot6d_to_matrix(const Rot6D& r) {
  const double na = r.a.norm();
  if (na < kDegenerateTol) {
    raise(ErrorCode::DegenerateInput, "rot6d first column has near-zero norm");
  }
  const Vec3 c1 = r.a / na;
  const Vec3 residual = r.b - c1.dot(r.b) * c1;
  const double nr = residual.norm();
  if (nr < kDegenerateTol) {
    raise(ErrorCode::DegenerateInput, "rot6d columns are near collinear");
  }
  const Vec3 c2 = residual / nr;
  const Vec3 c3 = c1.cross(c2);
  Mat3 R;
  R.col(0) = c1;
  R.col(1) = c2;
  R.col(2) = c3;
  return R;
}

bool is_rotation_matrix(const Mat3& R, double tol) {
  return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

Rot6D matrix_to_rot6d(const Mat3& R) {
  if (!is_rotation_matrix(R, 1e-5)) {
    raise(ErrorCode::InvalidRotation, "matrix is not orthonormal with det +1");
  }
  return Rot6D{R.col(0), R.col(1)};
}

Rot6D blend_rot6d(const std::vector<double>& weights, const std::vector<Rot6D>& rots) {
  if (rots.empty() || weights.size() != rots.size()) {
    raise(ErrorCode::EmptyInput, "blend_rot6d needs equal-length nonempty inputs");
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0.0)) {
    raise(ErrorCode::ZeroWeightSum, "blend_rot6d weight sum must be positive");
  }
  Vec3 a = Vec3::Zero(), b = Vec3::Zero();
  for (std::size_t i = 0; i < rots.size(); ++i) {
    a += weights[i] * rots[i].a;
    b += weights[i] * rots[i].b;
  }
  return Rot6D{a / wsum, b / wsum};
}

std::pair<Rot6D, Vec3> apply_rigid(const RigidTransform& rho, const Rot6D& theta_root,
                                   const Vec3& gamma) {
  const Mat3 R = rot6d_to_matrix(rho.rotation);
  // Rotating both 6D columns equals taking the first two columns of R*theta;
  // Gram-Schmidt commutes with left multiplication by a rotation.
  Rot6D out{R * theta_root.a, R * theta_root.b};
  return {out, R * gamma + rho.translation};
}

RigidTransform compose_rigid(const RigidTransform& second, const RigidTransform& first) {
  const Mat3 R2 = rot6d_to_matrix(second.rotation);
  const Mat3 R1 = rot6d_to_matrix(first.rotation);
  RigidTransform out;
  out.rotation = matrix_to_rot6d(R2 * R1);
  out.translation = R2 * first.translation + second.translation;
  return out;
}

}  // namespace lmp
