#pragma once

#include <array>
#include <vector>

#include "lmp/body_model.hpp"

namespace lmp {

// A motion sample: timestamps, per-frame joint rotations and root
// displacements, one body shape. Units are seconds/metres unless the
// sequence has been normalized.
struct FrameSequence {
  std::vector<double> timestamps;
  std::vector<Pose> poses;
  std::vector<Vec3> displacements;
  BodyShape shape;

  int frames() const { return static_cast<int>(timestamps.size()); }
  int joints() const { return poses.empty() ? 0 : poses[0].joints(); }
  double duration() const { return timestamps.back() - timestamps.front(); }
  void validate() const;

  Eigen::MatrixXd theta_matrix() const;  // n x (J*6)
  Eigen::MatrixXd gamma_matrix() const;  // n x 3
};

// Per-sequence affine maps: gamma to [-1,1] per axis, tau to [0,1].
struct NormalizationInfo {
  Vec3 gamma_min = Vec3::Zero();
  Vec3 gamma_max = Vec3::Zero();
  std::array<bool, 3> constant_axis = {false, false, false};
  double tau_start = 0.0;
  double tau_end = 1.0;

  Vec3 normalize_gamma(const Vec3& g) const;
  Vec3 denormalize_gamma(const Vec3& g) const;
  double normalize_tau(double t) const;
  double denormalize_tau(double t) const;
};

std::pair<FrameSequence, NormalizationInfo> normalize(const FrameSequence& seq);
FrameSequence denormalize(const FrameSequence& seq, const NormalizationInfo& info);

// Evaluates the sequence at new timestamps inside its span: linear
// interpolation on gamma, componentwise 6D blend on rotations.
FrameSequence resample(const FrameSequence& src, const std::vector<double>& new_timestamps);

}  // namespace lmp
