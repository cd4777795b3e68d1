#include "lmp/motion.hpp"

#include <algorithm>
#include <cmath>

#include "lmp/error.hpp"

namespace lmp {

namespace {
constexpr double kConstantAxisEps = 1e-12;
}

void FrameSequence::validate() const {
  if (frames() < 2) raise(ErrorCode::LengthMismatch, "sequence needs at least 2 frames");
  if (poses.size() != timestamps.size() || displacements.size() != timestamps.size()) {
    raise(ErrorCode::LengthMismatch, "sequence field lengths disagree");
  }
  for (int i = 1; i < frames(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      raise(ErrorCode::UnnormalizedInput, "timestamps must be strictly increasing");
    }
  }
  const int J = poses[0].joints();
  for (const auto& p : poses) {
    if (p.joints() != J) raise(ErrorCode::LengthMismatch, "inconsistent joint counts");
  }
}

Eigen::MatrixXd FrameSequence::theta_matrix() const {
  const int n = frames();
  const int J = joints();
  Eigen::MatrixXd m(n, 6 * J);
  for (int i = 0; i < n; ++i) m.row(i) = poses[i].flat().transpose();
  return m;
}

Eigen::MatrixXd FrameSequence::gamma_matrix() const {
  Eigen::MatrixXd m(frames(), 3);
  for (int i = 0; i < frames(); ++i) m.row(i) = displacements[i].transpose();
  return m;
}

Vec3 NormalizationInfo::normalize_gamma(const Vec3& g) const {
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    out[a] = constant_axis[a]
                 ? 0.0
                 : 2.0 * (g[a] - gamma_min[a]) / (gamma_max[a] - gamma_min[a]) - 1.0;
  }
  return out;
}

Vec3 NormalizationInfo::denormalize_gamma(const Vec3& g) const {
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    out[a] = constant_axis[a] ? gamma_min[a]
                              : gamma_min[a] + 0.5 * (g[a] + 1.0) * (gamma_max[a] - gamma_min[a]);
  }
  return out;
}

double NormalizationInfo::normalize_tau(double t) const {
  return (t - tau_start) / (tau_end - tau_start);
}

double NormalizationInfo::denormalize_tau(double t) const {
  return tau_start + t * (tau_end - tau_start);
}

std::pair<FrameSequence, NormalizationInfo> normalize(const FrameSequence& seq) {
  seq.validate();
  NormalizationInfo info;
  info.tau_start = seq.timestamps.front();
  info.tau_end = seq.timestamps.back();
  info.gamma_min = seq.displacements[0];
  info.gamma_max = seq.displacements[0];
  for (const auto& g : seq.displacements) {
    info.gamma_min = info.gamma_min.cwiseMin(g);
    info.gamma_max = info.gamma_max.cwiseMax(g);
  }
  for (int a = 0; a < 3; ++a) {
    info.constant_axis[a] = info.gamma_max[a] - info.gamma_min[a] < kConstantAxisEps;
  }
  FrameSequence out = seq;
  for (int i = 0; i < out.frames(); ++i) {
    out.timestamps[i] = info.normalize_tau(seq.timestamps[i]);
    out.displacements[i] = info.normalize_gamma(seq.displacements[i]);
  }
  // endpoints are exact by construction
  out.timestamps.front() = 0.0;
  out.timestamps.back() = 1.0;
  return {std::move(out), info};
}

FrameSequence denormalize(const FrameSequence& seq, const NormalizationInfo& info) {
  FrameSequence out = seq;
  for (int i = 0; i < out.frames(); ++i) {
    out.timestamps[i] = info.denormalize_tau(seq.timestamps[i]);
    out.displacements[i] = info.denormalize_gamma(seq.displacements[i]);
  }
  return out;
}

FrameSequence resample(const FrameSequence& src, const std::vector<double>& new_timestamps) {
  src.validate();
  FrameSequence out;
  out.shape = src.shape;
  out.timestamps = new_timestamps;
  const int J = src.joints();
  for (double t : new_timestamps) {
    if (t < src.timestamps.front() - 1e-9 || t > src.timestamps.back() + 1e-9) {
      raise(ErrorCode::SourceTooShort, "resample timestamp outside source span");
    }
    auto hi = std::lower_bound(src.timestamps.begin(), src.timestamps.end(), t);
    std::size_t i1 = std::min<std::size_t>(std::distance(src.timestamps.begin(), hi),
                                           src.timestamps.size() - 1);
    if (i1 == 0) i1 = 1;
    const std::size_t i0 = i1 - 1;
    const double span = src.timestamps[i1] - src.timestamps[i0];
    const double w = std::clamp((t - src.timestamps[i0]) / span, 0.0, 1.0);
    out.displacements.push_back((1.0 - w) * src.displacements[i0] + w * src.displacements[i1]);
    Pose pose(J);
    for (int j = 0; j < J; ++j) {
      pose.theta[j] = blend_rot6d({1.0 - w, w}, {src.poses[i0].theta[j], src.poses[i1].theta[j]});
    }
    out.poses.push_back(std::move(pose));
  }
  return out;
}

}  // namespace lmp
