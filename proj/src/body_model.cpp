#include "lmp/body_model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lmp/error.hpp"

namespace lmp {

namespace {

constexpr int kSkeletonFormatVersion = 1;
constexpr double kShellRadius = 0.04;      // metres
constexpr double kGoldenAngle = 2.399963229728653;

// Orthonormal frame around a bone's rest direction; radial directions are
// spread around it per sample index. Shaped offsets stay collinear with the
// rest offset, so the frame does not depend on beta.
void bone_frame(const Vec3& rest, Vec3& e1, Vec3& e2) {
  const Vec3 u = rest.normalized();
  const Vec3 h = std::abs(u.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  e1 = (h - h.dot(u) * u).normalized();
  e2 = u.cross(e1);
}

Vec3 radial_dir(const Skeleton& skel, int joint, int sample) {
  Vec3 e1, e2;
  bone_frame(skel.rest_offset[joint], e1, e2);
  const double phi = kGoldenAngle * static_cast<double>(sample + 7 * joint);
  return std::cos(phi) * e1 + std::sin(phi) * e2;
}

double sample_fraction(int k, int samples_per_bone) {
  return (static_cast<double>(k) + 0.5) / static_cast<double>(samples_per_bone);
}

}  // namespace

void Skeleton::validate() const {
  const int J = joints();
  if (J < 2) raise(ErrorCode::InvalidConfig, "skeleton needs at least 2 joints");
  if (static_cast<int>(rest_offset.size()) != J ||
      shape_sensitivity.rows() != J || static_cast<int>(names.size()) != J) {
    raise(ErrorCode::LengthMismatch, "skeleton field lengths disagree");
  }
  if (parent[0] != -1) raise(ErrorCode::InvalidConfig, "joint 0 must be the root");
  if (rest_offset[0].norm() != 0.0) {
    raise(ErrorCode::InvalidConfig, "root rest offset must be zero");
  }
  for (int j = 1; j < J; ++j) {
    if (parent[j] < 0 || parent[j] >= j) {
      raise(ErrorCode::InvalidConfig, "parents must form a tree with parent index < child");
    }
  }
}

Eigen::VectorXd Pose::flat() const {
  Eigen::VectorXd v(theta.size() * 6);
  for (std::size_t j = 0; j < theta.size(); ++j) v.segment<6>(6 * j) = theta[j].flat();
  return v;
}

Pose Pose::from_flat(const Eigen::VectorXd& v) {
  if (v.size() % 6 != 0) raise(ErrorCode::LengthMismatch, "pose vector length must be J*6");
  Pose pose(static_cast<int>(v.size() / 6));
  for (int j = 0; j < pose.joints(); ++j) {
    pose.theta[j] = Rot6D::from_flat(v.segment<6>(6 * j));
  }
  return pose;
}

Skeleton default_skeleton() {
  Skeleton s;
  struct J { const char* name; int parent; double x, y, z; };
  const J joints[] = {
      {"pelvis", -1, 0, 0, 0},
      {"spine1", 0, 0, 0.12, 0},
      {"spine2", 1, 0, 0.13, 0},
      {"chest", 2, 0, 0.13, 0},
      {"neck", 3, 0, 0.12, 0},
      {"head", 4, 0, 0.10, 0},
      {"l_collar", 3, 0.03, 0.10, 0},
      {"l_shoulder", 6, 0.14, 0, 0},
      {"l_elbow", 7, 0.28, 0, 0},
      {"l_wrist", 8, 0.25, 0, 0},
      {"r_collar", 3, -0.03, 0.10, 0},
      {"r_shoulder", 10, -0.14, 0, 0},
      {"r_elbow", 11, -0.28, 0, 0},
      {"r_wrist", 12, -0.25, 0, 0},
      {"l_hip", 0, 0.09, -0.06, 0},
      {"l_knee", 14, 0, -0.40, 0},
      {"l_ankle", 15, 0, -0.42, 0},
      {"r_hip", 0, -0.09, -0.06, 0},
      {"r_knee", 17, 0, -0.40, 0},
      {"r_ankle", 18, 0, -0.42, 0},
  };
  const int J = static_cast<int>(std::size(joints));
  s.shape_sensitivity = Eigen::MatrixXd::Zero(J, 8);
  for (int j = 0; j < J; ++j) {
    s.names.emplace_back(joints[j].name);
    s.parent.push_back(joints[j].parent);
    s.rest_offset.emplace_back(joints[j].x, joints[j].y, joints[j].z);
    if (j == 0) continue;
    auto& sens = s.shape_sensitivity;
    sens(j, 0) = 0.05;  // overall size
    const bool leg = j >= 14;
    const bool arm = j >= 6 && j <= 13;
    const bool torso = j >= 1 && j <= 3;
    const bool head = j == 4 || j == 5;
    if (leg) sens(j, 1) = 0.08;
    if (arm) sens(j, 2) = 0.08;
    if (torso) sens(j, 3) = 0.06;
    if (head) sens(j, 4) = 0.05;
    if (j == 7 || j == 8 || j == 11 || j == 12 || j == 14 || j == 15 || j == 17 || j == 18) {
      sens(j, 5) = 0.04;
    }
    if (j == 9 || j == 13 || j == 16 || j == 19) sens(j, 6) = 0.03;
    if (torso || head) sens(j, 7) = 0.03;
  }
  s.validate();
  return s;
}

Skeleton load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open skeleton file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("skeleton json: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kSkeletonFormatVersion) {
    raise(ErrorCode::SchemaVersionMismatch, "unsupported skeleton format_version");
  }
  for (const char* field : {"names", "parents", "rest_offsets", "shape_sensitivity"}) {
    if (!j.contains(field)) raise(ErrorCode::ParseError, std::string("skeleton missing field ") + field);
  }
  Skeleton s;
  s.names = j["names"].get<std::vector<std::string>>();
  s.parent = j["parents"].get<std::vector<int>>();
  for (const auto& row : j["rest_offsets"]) {
    if (row.size() != 3) raise(ErrorCode::ParseError, "rest_offsets rows must have 3 entries");
    s.rest_offset.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
  }
  const auto& sens = j["shape_sensitivity"];
  const int J = static_cast<int>(s.parent.size());
  if (static_cast<int>(sens.size()) != J) {
    raise(ErrorCode::ParseError, "shape_sensitivity row count mismatch");
  }
  const int dims = sens.empty() ? 0 : static_cast<int>(sens[0].size());
  s.shape_sensitivity = Eigen::MatrixXd::Zero(J, dims);
  for (int r = 0; r < J; ++r) {
    for (int c = 0; c < dims; ++c) s.shape_sensitivity(r, c) = sens[r][c].get<double>();
  }
  s.validate();
  return s;
}

void save_skeleton(const Skeleton& skel, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kSkeletonFormatVersion;
  j["names"] = skel.names;
  j["parents"] = skel.parent;
  auto offsets = nlohmann::json::array();
  for (const auto& o : skel.rest_offset) offsets.push_back({o.x(), o.y(), o.z()});
  j["rest_offsets"] = offsets;
  auto sens = nlohmann::json::array();
  for (Eigen::Index r = 0; r < skel.shape_sensitivity.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < skel.shape_sensitivity.cols(); ++c) {
      row.push_back(skel.shape_sensitivity(r, c));
    }
    sens.push_back(row);
  }
  j["shape_sensitivity"] = sens;
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write skeleton file " + path);
  out << j.dump(1) << "\n";
}

std::vector<Vec3> shaped_offsets(const Skeleton& skel, const BodyShape& beta) {
  const int J = skel.joints();
  if (beta.beta.size() != skel.shape_sensitivity.cols()) {
    raise(ErrorCode::LengthMismatch, "beta dimension does not match skeleton sensitivity table");
  }
  std::vector<Vec3> out(J);
  for (int j = 0; j < J; ++j) {
    const double factor = 1.0 + skel.shape_sensitivity.row(j).dot(beta.beta.transpose());
    out[j] = skel.rest_offset[j] * factor;
  }
  return out;
}

std::vector<Vec3> forward_kinematics(const Pose& pose, const Vec3& gamma,
                                     const BodyShape& beta, const Skeleton& skel) {
  const int J = skel.joints();
  if (pose.joints() != J) raise(ErrorCode::LengthMismatch, "pose joint count mismatch");
  const auto offsets = shaped_offsets(skel, beta);
  std::vector<Vec3> pos(J);
  std::vector<Mat3> glob(J);
  for (int j = 0; j < J; ++j) {
    const Mat3 local = rot6d_to_matrix(pose.theta[j]);
    if (skel.parent[j] < 0) {
      glob[j] = local;
      pos[j] = gamma;
    } else {
      const int p = skel.parent[j];
      glob[j] = glob[p] * local;
      pos[j] = pos[p] + glob[p] * offsets[j];
    }
  }
  return pos;
}

std::vector<Vec3> surface_points(const Pose& pose, const Vec3& gamma, const BodyShape& beta,
                                 const Skeleton& skel, int samples_per_bone) {
  if (samples_per_bone < 1) raise(ErrorCode::InvalidConfig, "samples_per_bone must be >= 1");
  const int J = skel.joints();
  if (pose.joints() != J) raise(ErrorCode::LengthMismatch, "pose joint count mismatch");
  const auto offsets = shaped_offsets(skel, beta);
  std::vector<Vec3> pos(J);
  std::vector<Mat3> glob(J);
  for (int j = 0; j < J; ++j) {
    const Mat3 local = rot6d_to_matrix(pose.theta[j]);
    if (skel.parent[j] < 0) {
      glob[j] = local;
      pos[j] = gamma;
    } else {
      const int p = skel.parent[j];
      glob[j] = glob[p] * local;
      pos[j] = pos[p] + glob[p] * offsets[j];
    }
  }
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(J - 1) * samples_per_bone);
  for (int j = 1; j < J; ++j) {
    const int p = skel.parent[j];
    for (int k = 0; k < samples_per_bone; ++k) {
      const Vec3 local =
          sample_fraction(k, samples_per_bone) * offsets[j] + kShellRadius * radial_dir(skel, j, k);
      points.push_back(pos[p] + glob[p] * local);
    }
  }
  return points;
}

double mpjpe(const std::vector<std::vector<Vec3>>& predicted,
             const std::vector<std::vector<Vec3>>& reference) {
  if (predicted.size() != reference.size() || predicted.empty()) {
    raise(ErrorCode::LengthMismatch, "mpjpe frame counts differ or are empty");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != reference[i].size()) {
      raise(ErrorCode::LengthMismatch, "mpjpe joint counts differ");
    }
    for (std::size_t j = 0; j < predicted[i].size(); ++j) {
      total += (predicted[i][j] - reference[i][j]).norm();
      ++count;
    }
  }
  return 1000.0 * total / static_cast<double>(count);
}

FkVars forward_kinematics_t(nn::Graph& g, const Skeleton& skel, ad::Var theta_flat,
                            ad::Var gamma, ad::Var beta) {
  const int J = skel.joints();
  if (theta_flat.cols() != 6 * J) raise(ErrorCode::LengthMismatch, "theta_flat must be n x J*6");
  ad::Tape& t = g.tape();
  FkVars fk;
  fk.joint_pos.resize(J);
  fk.joint_rot.resize(J);
  for (int j = 0; j < J; ++j) {
    ad::Var local = ad::gram_schmidt_rows(ad::slice_cols(theta_flat, 6 * j, 6));
    if (skel.parent[j] < 0) {
      fk.joint_rot[j] = local;
      fk.joint_pos[j] = gamma;
    } else {
      const int p = skel.parent[j];
      fk.joint_rot[j] = ad::rot_compose(fk.joint_rot[p], local);
      // offset_j(beta) = rest_j * (1 + s_j . beta)
      ad::Mat srow = skel.shape_sensitivity.row(j);
      ad::Var factor = ad::add_scalar(ad::sum_all(ad::mul(beta, t.constant(srow))), 1.0);
      ad::Mat rest = skel.rest_offset[j].transpose();
      ad::Var offset = ad::col_broadcast_mul(t.constant(rest), factor);
      fk.joint_pos[j] = ad::add(fk.joint_pos[p], ad::row_rotate(fk.joint_rot[p], offset));
    }
  }
  return fk;
}

std::vector<ad::Var> surface_points_t(nn::Graph& g, const Skeleton& skel, const FkVars& fk,
                                      ad::Var beta, int samples_per_bone) {
  if (samples_per_bone < 1) raise(ErrorCode::InvalidConfig, "samples_per_bone must be >= 1");
  const int J = skel.joints();
  ad::Tape& t = g.tape();
  std::vector<ad::Var> points;
  points.reserve(static_cast<std::size_t>(J - 1) * samples_per_bone);
  for (int j = 1; j < J; ++j) {
    const int p = skel.parent[j];
    ad::Mat srow = skel.shape_sensitivity.row(j);
    ad::Var factor = ad::add_scalar(ad::sum_all(ad::mul(beta, t.constant(srow))), 1.0);
    ad::Var offset = ad::col_broadcast_mul(t.constant(ad::Mat(skel.rest_offset[j].transpose())), factor);
    for (int k = 0; k < samples_per_bone; ++k) {
      ad::Mat radial = (kShellRadius * radial_dir(skel, j, k)).transpose();
      ad::Var local = ad::add(ad::scale(offset, sample_fraction(k, samples_per_bone)),
                              t.constant(radial));
      points.push_back(ad::add(fk.joint_pos[p], ad::row_rotate(fk.joint_rot[p], local)));
    }
  }
  return points;
}

}  // namespace lmp
