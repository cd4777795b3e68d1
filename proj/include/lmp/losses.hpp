#pragma once

#include "lmp/prior.hpp"

namespace lmp {

struct LossWeights {
  double lambda_KL = 1e-4;
  double lambda_reg = 1e-2;
  double lambda_3D = 0.0;  // staged 0 -> 1 during training
  double lambda_prior = 1e-2;
};

// (1/m) sum_j KL(N(mu_j, sigma_j) || N(0, I)), closed form
// 0.5 * sum_d (mu^2 + sigma^2 - 1 - 2 log sigma).
double kl_loss(const LatentDistributionSequence& dist);

// sum_j (delta_j - 1/m)^2
double duration_reg(const Eigen::VectorXd& delta);

// (1/n) sum_i [ |theta - theta_GT|^2 + |gamma - gamma_GT|^2
//               + lambda_3D * mean_points |M - M_GT|^2 ].
// theta/gamma are compared in the space the sequences are given in; the
// surface term is evaluated in metres via `info` (pass the identity info if
// the sequences are already metric).
double global_rec_loss(const FrameSequence& pred, const FrameSequence& gt, const Skeleton& skel,
                       const NormalizationInfo& info, int samples_per_bone, double lambda_3D);

// (1/mn) sum_i sum_j G_j(tau_i) [ |rho_j*theta_j - theta_GT|^2
//                                 + |rho_j*gamma_j - gamma_GT|^2 ].
// per_segment holds the pre-rho decoder outputs, indexed [segment][frame].
double segment_rec_loss(const std::vector<std::vector<std::pair<Pose, Vec3>>>& per_segment,
                        const SegmentLayout& layout, const FrameSequence& gt);

// rec_global + rec_segment + lambda_KL * kl + lambda_reg * reg
double total_loss(double rec_global, double rec_segment, double kl, double reg,
                  const LossWeights& w);

// ---- tape versions used by the trainer ----

struct LossVars {
  ad::Var total;
  ad::Var global;
  ad::Var segment;
  ad::Var kl;
  ad::Var reg;
};

// Builds the full Eq-style objective for one sequence on the tape. The
// ground truth enters as constants; `fwd` carries the live model outputs.
LossVars training_loss_t(nn::Graph& g, const PriorForward& fwd, const FrameSequence& gt_norm,
                         const NormalizationInfo& info, const Skeleton& skel,
                         int samples_per_bone, const LossWeights& w);

}  // namespace lmp
