#include "lmp/losses.hpp"

#include <cmath>

#include "lmp/error.hpp"

namespace lmp {

double kl_loss(const LatentDistributionSequence& dist) {
  if (dist.mu.rows() != dist.log_sigma.rows() || dist.mu.cols() != dist.log_sigma.cols() ||
      dist.mu.rows() < 1) {
    raise(ErrorCode::LengthMismatch, "kl_loss distribution shapes");
  }
  const Eigen::ArrayXXd mu = dist.mu.array();
  const Eigen::ArrayXXd ls = dist.log_sigma.array();
  const double total = 0.5 * (mu.square() + (2.0 * ls).exp() - 1.0 - 2.0 * ls).sum();
  return total / static_cast<double>(dist.mu.rows());
}

double duration_reg(const Eigen::VectorXd& delta) {
  if (delta.size() < 1) raise(ErrorCode::EmptyInput, "duration_reg needs deltas");
  const double target = 1.0 / static_cast<double>(delta.size());
  return (delta.array() - target).square().sum();
}

double global_rec_loss(const FrameSequence& pred, const FrameSequence& gt, const Skeleton& skel,
                       const NormalizationInfo& info, int samples_per_bone, double lambda_3D) {
  if (pred.frames() != gt.frames()) raise(ErrorCode::LengthMismatch, "global_rec_loss frames");
  const int n = pred.frames();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += (pred.poses[i].flat() - gt.poses[i].flat()).squaredNorm();
    acc += (pred.displacements[i] - gt.displacements[i]).squaredNorm();
    if (lambda_3D != 0.0) {
      const auto mp = surface_points(pred.poses[i], info.denormalize_gamma(pred.displacements[i]),
                                     pred.shape, skel, samples_per_bone);
      const auto mg = surface_points(gt.poses[i], info.denormalize_gamma(gt.displacements[i]),
                                     gt.shape, skel, samples_per_bone);
      double point_acc = 0.0;
      for (std::size_t p = 0; p < mp.size(); ++p) point_acc += (mp[p] - mg[p]).squaredNorm();
      acc += lambda_3D * point_acc / static_cast<double>(mp.size());
    }
  }
  return acc / static_cast<double>(n);
}

double segment_rec_loss(const std::vector<std::vector<std::pair<Pose, Vec3>>>& per_segment,
                        const SegmentLayout& layout, const FrameSequence& gt) {
  const int m = static_cast<int>(per_segment.size());
  const int n = gt.frames();
  if (m < 1 || layout.segments() != m) raise(ErrorCode::LengthMismatch, "segment_rec_loss m");
  double acc = 0.0;
  for (int j = 0; j < m; ++j) {
    if (static_cast<int>(per_segment[j].size()) != n) {
      raise(ErrorCode::LengthMismatch, "segment_rec_loss frames");
    }
    for (int i = 0; i < n; ++i) {
      // both terms use the same mask value G_j(tau_i)
      const double G = gaussian_mask(gt.timestamps[i], layout.Delta[j], layout.delta[j]);
      Pose pose = per_segment[j][i].first;
      auto [root, gamma] = apply_rigid(layout.rho[j], pose.theta[0], per_segment[j][i].second);
      pose.theta[0] = root;
      acc += G * ((pose.flat() - gt.poses[i].flat()).squaredNorm() +
                  (gamma - gt.displacements[i]).squaredNorm());
    }
  }
  return acc / static_cast<double>(m * n);
}

double total_loss(double rec_global, double rec_segment, double kl, double reg,
                  const LossWeights& w) {
  return rec_global + rec_segment + w.lambda_KL * kl + w.lambda_reg * reg;
}

LossVars training_loss_t(nn::Graph& g, const PriorForward& fwd, const FrameSequence& gt_norm,
                         const NormalizationInfo& info, const Skeleton& skel,
                         int samples_per_bone, const LossWeights& w) {
  ad::Tape& t = g.tape();
  const int n = gt_norm.frames();
  const int m = static_cast<int>(fwd.mask.size());

  ad::Var theta_gt = t.constant(gt_norm.theta_matrix());
  ad::Var gamma_gt = t.constant(gt_norm.gamma_matrix());

  LossVars out;

  // global term, parametric part
  ad::Var sq_theta = ad::sum_all(ad::square(ad::sub(fwd.theta, theta_gt)));
  ad::Var sq_gamma = ad::sum_all(ad::square(ad::sub(fwd.gamma, gamma_gt)));
  out.global = ad::scale(ad::add(sq_theta, sq_gamma), 1.0 / n);

  if (w.lambda_3D != 0.0) {
    // surface term in metres: denormalize the predicted gamma, run FK,
    // compare against precomputed ground-truth samples
    Eigen::RowVector3d axis_scale, axis_offset;
    for (int a = 0; a < 3; ++a) {
      if (info.constant_axis[a]) {
        axis_scale[a] = 0.0;
        axis_offset[a] = info.gamma_min[a];
      } else {
        axis_scale[a] = 0.5 * (info.gamma_max[a] - info.gamma_min[a]);
        axis_offset[a] = info.gamma_min[a] + axis_scale[a];
      }
    }
    ad::Var gamma_m = ad::row_broadcast_add(
        ad::row_broadcast_mul(fwd.gamma, t.constant(axis_scale)), t.constant(axis_offset));
    ad::Var beta = t.constant(gt_norm.shape.beta.transpose());
    FkVars fk = forward_kinematics_t(g, skel, fwd.theta, gamma_m, beta);
    std::vector<ad::Var> pred_points = surface_points_t(g, skel, fk, beta, samples_per_bone);
    const std::size_t P = pred_points.size();
    // ground truth point trajectories as constants, one n x 3 block per point
    std::vector<Eigen::MatrixXd> gt_points(P, Eigen::MatrixXd(n, 3));
    for (int i = 0; i < n; ++i) {
      const auto pts = surface_points(gt_norm.poses[i],
                                      info.denormalize_gamma(gt_norm.displacements[i]),
                                      gt_norm.shape, skel, samples_per_bone);
      for (std::size_t p = 0; p < P; ++p) gt_points[p].row(i) = pts[p].transpose();
    }
    ad::Var acc;
    for (std::size_t p = 0; p < P; ++p) {
      ad::Var d = ad::sum_all(ad::square(ad::sub(pred_points[p], t.constant(gt_points[p]))));
      acc = p == 0 ? d : ad::add(acc, d);
    }
    out.global = ad::add(out.global,
                         ad::scale(acc, w.lambda_3D / (static_cast<double>(P) * n)));
  }

  // per-segment term
  ad::Var seg_acc;
  for (int j = 0; j < m; ++j) {
    ad::Var sq = ad::add(ad::sum_rows(ad::square(ad::sub(fwd.seg_theta[j], theta_gt))),
                         ad::sum_rows(ad::square(ad::sub(fwd.seg_gamma[j], gamma_gt))));
    ad::Var weighted = ad::sum_all(ad::mul(sq, fwd.mask[j]));
    seg_acc = j == 0 ? weighted : ad::add(seg_acc, weighted);
  }
  out.segment = ad::scale(seg_acc, 1.0 / (static_cast<double>(m) * n));

  // KL in closed form
  ad::Var two_ls = ad::scale(fwd.log_sigma, 2.0);
  ad::Var kl_terms = ad::sub(ad::add(ad::square(fwd.mu), ad::exp_(two_ls)),
                             ad::add_scalar(two_ls, 1.0));
  out.kl = ad::scale(ad::sum_all(kl_terms), 0.5 / static_cast<double>(fwd.mu.rows()));

  // duration regularizer
  out.reg = ad::sum_all(ad::square(ad::add_scalar(fwd.delta, -1.0 / m)));

  out.total = ad::add(ad::add(out.global, out.segment),
                      ad::add(ad::scale(out.kl, w.lambda_KL), ad::scale(out.reg, w.lambda_reg)));
  return out;
}

}  // namespace lmp
