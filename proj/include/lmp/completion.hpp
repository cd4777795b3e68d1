#pragma once

#include "lmp/losses.hpp"
#include "lmp/pointcloud.hpp"
#include "lmp/prior.hpp"
#include "lmp/trainer.hpp"

namespace lmp {

struct CompletionConfig {
  double lambda_prior = 0.01;
  int iterations = 300;
  double step_size = 1e-2;
  double output_fps = 30.0;
  bool monotone = true;          // reject steps that increase the objective
  double early_stop_rel = 1e-5;  // relative objective change

  void validate() const;
};

// Maps a point-cloud sequence to the prior's latent space: a shared
// per-point MLP with max pooling replaces the frame embedding, the same
// seq-to-set transformer topology emits the m latents, and an auxiliary
// head emits the body shape.
class InitEncoder {
 public:
  InitEncoder(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }

  // clouds: per-frame k_i x 3 vars/constants (centered); tau: n x 1 in [0,1]
  std::pair<ad::Var, ad::Var> forward_t(nn::Graph& g, const std::vector<ad::Var>& clouds,
                                        ad::Var tau) const;  // -> (z m x D, beta 1 x dims)

  std::pair<LatentSequence, BodyShape> encode(const std::vector<Eigen::MatrixXd>& centered_clouds,
                                              const std::vector<double>& tau_norm) const;

 private:
  ModelConfig cfg_;
  nn::ParamStore params_;
  nn::Mlp point_mlp_;
  nn::SeqToSet seq2set_;
  nn::Linear head_z_;
  nn::Linear head_beta_;
  bool trained_ = false;
};

// Estimated per-sequence normalization for metric decoding: per-axis
// bounding box of the root trajectory inferred from cloud centroids, with a
// slack floor so the optimizer keeps freedom on nearly-constant axes.
NormalizationInfo estimate_normalization(const PointCloudSequence& pcs, const Skeleton& skel);

// Permutation-invariant initialization, spec'd entry point. Raises
// UntrainedInitEncoder when the encoder has not been fitted.
std::pair<LatentSequence, BodyShape> init_encode(const InitEncoder& enc,
                                                 const PointCloudSequence& pcs,
                                                 const Skeleton& skel);

struct InitTrainConfig {
  int epochs = 150;
  double lr = 1e-4;
  int points_per_frame = 96;
  double fps = 10.0;
  std::uint64_t seed = 0;
};

// Fits the initialization encoder against the frozen prior: surface-sampled
// training sequences go in, the decoded (z, beta) is scored with the global
// reconstruction loss (lambda_3D = 0) against the ground truth.
void train_init_encoder(InitEncoder& enc, const PriorModel& frozen_prior,
                        const std::vector<FrameSequence>& dataset, const Skeleton& skel,
                        const TrainConfig& sampling_cfg, const InitTrainConfig& icfg);

struct CompletionResult {
  FrameSequence motion;    // dense, metric, at output_fps over the input span
  double chamfer_initial;  // objective's chamfer part at initialization (mm)
  double chamfer_final;    // same quantity after optimization
  int iterations_used;
  LatentSequence z;
  BodyShape beta;
  NormalizationInfo info;
};

// Latent optimization: argmin_{z, beta} chamfer + lambda_prior * |z - z0|^2,
// starting from the init encoder's output. Prior and body weights are never
// touched.
CompletionResult complete(const PriorModel& prior, const InitEncoder& init, const Skeleton& skel,
                          const PointCloudSequence& pcs, const CompletionConfig& cfg);

}  // namespace lmp
