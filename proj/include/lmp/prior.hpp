#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmp/motion.hpp"
#include "lmp/nn.hpp"

namespace lmp {

struct ModelConfig {
  int m = 8;                // latent primitives
  int latent_dim = 256;     // D
  int embed_dim = 127;      // E; transformer width is E+1 after tau concat
  int encoder_layers = 4;
  int heads = 8;
  int ff_width = 512;
  std::vector<int> decoder_hidden = {512, 512};
  std::vector<int> segment_hidden = {256};
  std::vector<int> point_hidden = {64, 64};  // init-encoder per-point MLP
  int joints = 20;
  int shape_dims = 8;
  int surface_samples_per_bone = 4;

  int model_width() const { return embed_dim + 1; }
  int frame_dim() const { return joints * 6 + 3; }
  void validate() const;
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);
std::string config_hash(const ModelConfig& cfg);

struct LatentDistributionSequence {
  Eigen::MatrixXd mu;         // m x D
  Eigen::MatrixXd log_sigma;  // m x D
};

struct LatentSequence {
  Eigen::MatrixXd z;  // m x D
};

// Learned partition of normalized time: segment i covers
// [Delta_i, Delta_i + delta_i], with its rigid transform back to sequence space.
struct SegmentLayout {
  Eigen::VectorXd delta;
  Eigen::VectorXd Delta;
  std::vector<RigidTransform> rho;

  int segments() const { return static_cast<int>(delta.size()); }
};

// G_i(tau) = exp(-((tau - c_i) / (delta_i/2))^2), centered at
// c_i = Delta_i + delta_i/2; equals e^-1 at both segment edges.
double gaussian_mask(double tau, double Delta_i, double delta_i);

// delta = softmax(delta_raw); Delta_i = sum_{j<i} delta_j.
SegmentLayout make_layout(const Eigen::VectorXd& delta_raw, std::vector<RigidTransform> rho);

// Mask-weighted average of rho-transformed per-segment outputs.
std::pair<Pose, Vec3> combine(const std::vector<std::pair<Pose, Vec3>>& per_segment,
                              const SegmentLayout& layout, double tau);

// Everything the trainer needs from one forward pass, still on the tape.
struct PriorForward {
  ad::Var mu, log_sigma;  // m x D
  ad::Var z;              // m x D
  ad::Var delta;          // 1 x m
  std::vector<ad::Var> mask;       // per primitive, n x 1
  std::vector<ad::Var> seg_theta;  // per primitive, n x (J*6), rho applied
  std::vector<ad::Var> seg_gamma;  // per primitive, n x 3, rho applied
  ad::Var theta;  // combined, n x (J*6)
  ad::Var gamma;  // combined, n x 3
};

class PriorModel {
 public:
  PriorModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // ---- plain inference ----
  // Input must be normalized (tau in [0,1], gamma in [-1,1]).
  LatentDistributionSequence encode(const FrameSequence& seq) const;
  static LatentSequence sample(const LatentDistributionSequence& dist,
                               const Eigen::MatrixXd& noise);
  // Raw duration scalar and rigid transform for one primitive.
  std::pair<double, RigidTransform> segment_params(const Eigen::VectorXd& z_i,
                                                   const BodyShape& beta) const;
  SegmentLayout layout_for(const LatentSequence& z, const BodyShape& beta) const;
  // Segment-local output, before rho. The caller supplies the segment
  // interval; (0, 1) makes the local clock equal to sequence time.
  std::pair<Pose, Vec3> decode_primitive(const Eigen::VectorXd& z_i, const BodyShape& beta,
                                         double tau, double Delta_i = 0.0,
                                         double delta_i = 1.0) const;
  // Full pipeline at arbitrary timestamps (normalized space in, normalized out).
  FrameSequence decode(const LatentSequence& z, const BodyShape& beta,
                       const std::vector<double>& timestamps) const;

  // ---- tape forward passes for training ----
  std::pair<ad::Var, ad::Var> encode_t(nn::Graph& g, ad::Var theta, ad::Var gamma,
                                       ad::Var tau) const;  // -> (mu, log_sigma)
  // Decode from a latent matrix var; tau is an n x 1 var (constant for
  // training, leaf when optimizing is not needed since masks read values).
  PriorForward decode_t(nn::Graph& g, ad::Var z, ad::Var beta, ad::Var tau) const;
  // Convenience: encode + reparameterized sample + decode, conditioned on beta.
  PriorForward forward_t(nn::Graph& g, ad::Var theta, ad::Var gamma, ad::Var tau, ad::Var beta,
                         const Eigen::MatrixXd& noise) const;

 private:
  ModelConfig cfg_;
  nn::ParamStore params_;
  nn::Linear embed_;
  nn::SeqToSet seq2set_;
  nn::Linear head_mu_;
  nn::Linear head_logsig_;
  nn::Mlp prim_dec_;
  nn::Mlp seg_head_;
};

}  // namespace lmp
