#pragma once

#include <string>
#include <vector>

#include "lmp/nn.hpp"
#include "lmp/rotation.hpp"
#include "lmp/tape.hpp"

namespace lmp {

// Simplified kinematic body standing in for a licensed statistical model.
// Anyone holding real body-model data can plug it in through the same
// skeleton schema (see README).
struct Skeleton {
  std::vector<int> parent;              // -1 for the root
  std::vector<Vec3> rest_offset;        // bone vector from parent, metres
  Eigen::MatrixXd shape_sensitivity;    // J x shape_dims, values in [0, 0.1]
  std::vector<std::string> names;

  int joints() const { return static_cast<int>(parent.size()); }
  void validate() const;
};

struct BodyShape {
  Eigen::VectorXd beta;  // PCA-like coefficients, default 8 dims

  BodyShape() : beta(Eigen::VectorXd::Zero(8)) {}
  explicit BodyShape(Eigen::VectorXd b) : beta(std::move(b)) {}
};

struct Pose {
  std::vector<Rot6D> theta;  // per joint, relative to parent

  Pose() = default;
  explicit Pose(int joints) : theta(joints) {}
  int joints() const { return static_cast<int>(theta.size()); }

  Eigen::VectorXd flat() const;                       // J*6
  static Pose from_flat(const Eigen::VectorXd& v);    // inverse
};

// The default 20-joint skeleton shipped with the project (foot joints are
// not modelled; they carry no rotation in the source mocap convention).
Skeleton default_skeleton();

Skeleton load_skeleton(const std::string& path);
void save_skeleton(const Skeleton& skel, const std::string& path);

// offset_j(beta) = rest_offset_j * (1 + sum_k beta_k * s_jk)
std::vector<Vec3> shaped_offsets(const Skeleton& skel, const BodyShape& beta);

// Joint positions in world space. Root sits at gamma; children accumulate
// rotated shape-dependent offsets down the tree.
std::vector<Vec3> forward_kinematics(const Pose& pose, const Vec3& gamma,
                                     const BodyShape& beta, const Skeleton& skel);

// Deterministic capsule-shell samples along every bone:
// point = parent_pos + R_glob(parent) * (f_k * offset_j(beta) + r * d_jk),
// with fixed fractions f_k and fixed radial directions d_jk.
// Count = (J-1) * samples_per_bone.
std::vector<Vec3> surface_points(const Pose& pose, const Vec3& gamma, const BodyShape& beta,
                                 const Skeleton& skel, int samples_per_bone);

// Mean per joint position error over frames and joints, in millimetres.
double mpjpe(const std::vector<std::vector<Vec3>>& predicted,
             const std::vector<std::vector<Vec3>>& reference);

// ---- differentiable batched variants (all frames of a sequence at once) ----

struct FkVars {
  std::vector<ad::Var> joint_pos;  // J entries, each n x 3
  std::vector<ad::Var> joint_rot;  // J entries, each n x 9 (global rotation)
};

// theta_flat: n x (J*6), gamma: n x 3, beta: 1 x shape_dims.
FkVars forward_kinematics_t(nn::Graph& g, const Skeleton& skel, ad::Var theta_flat,
                            ad::Var gamma, ad::Var beta);

// Per-point trajectories, (J-1)*samples_per_bone entries of n x 3 each,
// in the same order as surface_points.
std::vector<ad::Var> surface_points_t(nn::Graph& g, const Skeleton& skel, const FkVars& fk,
                                      ad::Var beta, int samples_per_bone);

}  // namespace lmp
