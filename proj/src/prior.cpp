#include "lmp/prior.hpp"

#include <cmath>

#include <json.hpp>

#include "lmp/error.hpp"

namespace lmp {

namespace {

std::vector<Eigen::Index> to_index(const std::vector<int>& v) {
  return std::vector<Eigen::Index>(v.begin(), v.end());
}

Eigen::RowVectorXd plain_linear(const nn::Linear& l, const Eigen::RowVectorXd& x) {
  return x * l.W->value + l.b->value;
}

Eigen::RowVectorXd plain_mlp(const nn::Mlp& mlp, Eigen::RowVectorXd x) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = plain_linear(mlp.layers[i], x);
    if (i + 1 < mlp.layers.size()) {
      switch (mlp.act) {
        case nn::Act::None: break;
        case nn::Act::Tanh: x = x.array().tanh(); break;
        case nn::Act::Gelu:
          for (Eigen::Index k = 0; k < x.size(); ++k) {
            x[k] = 0.5 * x[k] * (1.0 + std::erf(x[k] * M_SQRT1_2));
          }
          break;
      }
    }
  }
  return x;
}

// Identity rotation in 6D, tiled across joints. Decoder heads are biased with
// it so raw outputs start near valid rotations.
Eigen::RowVectorXd identity_pose_bias(int joints) {
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(joints * 6);
  for (int j = 0; j < joints; ++j) {
    b[6 * j + 0] = 1.0;
    b[6 * j + 4] = 1.0;
  }
  return b;
}

void check_tau_normalized(const Eigen::MatrixXd& tau) {
  if (tau.minCoeff() < -1e-6 || tau.maxCoeff() > 1.0 + 1e-6) {
    raise(ErrorCode::UnnormalizedInput, "timestamps must lie in [0,1]");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (m < 1 || latent_dim < 1 || embed_dim < 1 || encoder_layers < 1 || heads < 1 ||
      ff_width < 1 || joints < 2 || shape_dims < 0 || surface_samples_per_bone < 1) {
    raise(ErrorCode::InvalidConfig, "model config fields must be positive");
  }
  if (model_width() % heads != 0) {
    raise(ErrorCode::InvalidConfig, "embed_dim+1 must be divisible by heads");
  }
}

std::string config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["m"] = cfg.m;
  j["latent_dim"] = cfg.latent_dim;
  j["embed_dim"] = cfg.embed_dim;
  j["encoder_layers"] = cfg.encoder_layers;
  j["heads"] = cfg.heads;
  j["ff_width"] = cfg.ff_width;
  j["decoder_hidden"] = cfg.decoder_hidden;
  j["segment_hidden"] = cfg.segment_hidden;
  j["point_hidden"] = cfg.point_hidden;
  j["joints"] = cfg.joints;
  j["shape_dims"] = cfg.shape_dims;
  j["surface_samples_per_bone"] = cfg.surface_samples_per_bone;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("model config: ") + e.what());
  }
  ModelConfig cfg;
  cfg.m = j.value("m", cfg.m);
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.ff_width = j.value("ff_width", cfg.ff_width);
  cfg.decoder_hidden = j.value("decoder_hidden", cfg.decoder_hidden);
  cfg.segment_hidden = j.value("segment_hidden", cfg.segment_hidden);
  cfg.point_hidden = j.value("point_hidden", cfg.point_hidden);
  cfg.joints = j.value("joints", cfg.joints);
  cfg.shape_dims = j.value("shape_dims", cfg.shape_dims);
  cfg.surface_samples_per_bone = j.value("surface_samples_per_bone", cfg.surface_samples_per_bone);
  cfg.validate();
  return cfg;
}

std::string config_hash(const ModelConfig& cfg) {
  // FNV-1a over the canonical json
  const std::string s = config_to_json(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

double gaussian_mask(double tau, double Delta_i, double delta_i) {
  if (!(delta_i > 0.0)) raise(ErrorCode::InvalidConfig, "gaussian_mask needs delta > 0");
  const double center = Delta_i + delta_i / 2.0;
  const double u = (tau - center) / (delta_i / 2.0);
  return std::exp(-u * u);
}

SegmentLayout make_layout(const Eigen::VectorXd& delta_raw, std::vector<RigidTransform> rho) {
  const Eigen::Index m = delta_raw.size();
  if (m < 1) raise(ErrorCode::EmptyInput, "layout needs at least one primitive");
  if (!rho.empty() && static_cast<Eigen::Index>(rho.size()) != m) {
    raise(ErrorCode::LengthMismatch, "layout rho count mismatch");
  }
  SegmentLayout layout;
  Eigen::ArrayXd e = (delta_raw.array() - delta_raw.maxCoeff()).exp();
  layout.delta = (e / e.sum()).matrix();
  layout.Delta = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 1; i < m; ++i) layout.Delta[i] = layout.Delta[i - 1] + layout.delta[i - 1];
  layout.rho = rho.empty() ? std::vector<RigidTransform>(m) : std::move(rho);
  return layout;
}

std::pair<Pose, Vec3> combine(const std::vector<std::pair<Pose, Vec3>>& per_segment,
                              const SegmentLayout& layout, double tau) {
  const int m = static_cast<int>(per_segment.size());
  if (m < 1) raise(ErrorCode::EmptyInput, "combine needs at least one segment");
  if (layout.segments() != m) raise(ErrorCode::LengthMismatch, "combine layout size mismatch");
  const int J = per_segment[0].first.joints();
  std::vector<double> weights(m);
  double wsum = 0.0;
  for (int i = 0; i < m; ++i) {
    weights[i] = gaussian_mask(tau, layout.Delta[i], layout.delta[i]);
    wsum += weights[i];
  }
  if (!(wsum > 0.0)) raise(ErrorCode::ZeroWeightSum, "combine mask weights sum to zero");

  std::vector<std::pair<Pose, Vec3>> transformed(per_segment);
  for (int i = 0; i < m; ++i) {
    auto [root, gamma] =
        apply_rigid(layout.rho[i], per_segment[i].first.theta[0], per_segment[i].second);
    transformed[i].first.theta[0] = root;
    transformed[i].second = gamma;
  }
  Pose pose(J);
  Vec3 gamma = Vec3::Zero();
  for (int j = 0; j < J; ++j) {
    std::vector<Rot6D> rots(m);
    for (int i = 0; i < m; ++i) rots[i] = transformed[i].first.theta[j];
    pose.theta[j] = blend_rot6d(weights, rots);
  }
  for (int i = 0; i < m; ++i) gamma += weights[i] * transformed[i].second;
  return {pose, gamma / wsum};
}

PriorModel::PriorModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  const int d = cfg_.model_width();
  embed_ = nn::Linear::create(params_, "embed", cfg_.frame_dim(), cfg_.embed_dim, rng);
  seq2set_ = nn::SeqToSet::create(params_, "seq", d, cfg_.m, cfg_.encoder_layers, cfg_.heads,
                                  cfg_.ff_width, rng);
  head_mu_ = nn::Linear::create(params_, "head.mu", d, cfg_.latent_dim, rng);
  head_logsig_ = nn::Linear::create(params_, "head.logsig", d, cfg_.latent_dim, rng);
  // small initial sigma keeps early reconstructions near-deterministic
  head_logsig_.b->value.setConstant(-4.0);

  prim_dec_ = nn::Mlp::create(params_, "primdec", cfg_.latent_dim + cfg_.shape_dims + 1,
                              to_index(cfg_.decoder_hidden), cfg_.joints * 6 + 3, nn::Act::Tanh,
                              rng);
  Eigen::RowVectorXd pose_bias(cfg_.joints * 6 + 3);
  pose_bias << identity_pose_bias(cfg_.joints), Eigen::RowVector3d::Zero();
  prim_dec_.layers.back().b->value = pose_bias;

  seg_head_ = nn::Mlp::create(params_, "seghead", cfg_.latent_dim + cfg_.shape_dims,
                              to_index(cfg_.segment_hidden), 10, nn::Act::Tanh, rng);
  Eigen::RowVectorXd seg_bias = Eigen::RowVectorXd::Zero(10);
  seg_bias.segment<6>(1) = identity_pose_bias(1);
  seg_head_.layers.back().b->value = seg_bias;
}

std::pair<ad::Var, ad::Var> PriorModel::encode_t(nn::Graph& g, ad::Var theta, ad::Var gamma,
                                                 ad::Var tau) const {
  check_tau_normalized(tau.val());
  if (theta.cols() != 6 * cfg_.joints || gamma.cols() != 3 || tau.cols() != 1) {
    raise(ErrorCode::LengthMismatch, "encode input shapes");
  }
  if (theta.rows() < 2) raise(ErrorCode::LengthMismatch, "encode needs at least 2 frames");
  ad::Var frames = ad::concat_cols(theta, gamma);
  ad::Var emb = ad::tanh_(embed_(g, frames));
  ad::Var tokens = ad::concat_cols(emb, tau);
  ad::Var out = seq2set_(g, tokens);
  return {head_mu_(g, out), head_logsig_(g, out)};
}

PriorForward PriorModel::decode_t(nn::Graph& g, ad::Var z, ad::Var beta, ad::Var tau) const {
  const int m = cfg_.m;
  const Eigen::Index n = tau.rows();
  ad::Tape& t = g.tape();
  PriorForward fwd;
  fwd.z = z;

  // time-independent head: raw duration + rigid transform per primitive
  ad::Var seg_in = ad::concat_cols(z, ad::tile_rows(beta, m));
  ad::Var seg_out = seg_head_(g, seg_in);
  fwd.delta = ad::softmax_rows(ad::transpose(ad::slice_cols(seg_out, 0, 1)));
  ad::Var rho_rot = ad::gram_schmidt_rows(ad::slice_cols(seg_out, 1, 6));  // m x 9
  ad::Var rho_t = ad::slice_cols(seg_out, 7, 3);                           // m x 3

  ad::Var num_theta, num_gamma, den;
  for (int i = 0; i < m; ++i) {
    ad::Var delta_i = ad::slice_cols(fwd.delta, i, 1);
    ad::Var Delta_i = i == 0 ? t.constant(ad::Mat::Zero(1, 1))
                             : ad::sum_all(ad::slice_cols(fwd.delta, 0, i));
    // mask and segment-local clock over all requested timestamps
    ad::Var center_n = ad::tile_rows(ad::add(Delta_i, ad::scale(delta_i, 0.5)), n);
    ad::Var half_n = ad::tile_rows(ad::scale(delta_i, 0.5), n);
    ad::Var mask = ad::exp_(ad::neg(ad::square(ad::div(ad::sub(tau, center_n), half_n))));
    ad::Var s = ad::div(ad::sub(tau, ad::tile_rows(Delta_i, n)), ad::tile_rows(delta_i, n));

    ad::Var z_i = ad::slice_rows(z, i, 1);
    ad::Var in = ad::concat_cols(ad::concat_cols(ad::tile_rows(z_i, n), ad::tile_rows(beta, n)), s);
    ad::Var out = prim_dec_(g, in);
    ad::Var theta_i = ad::slice_cols(out, 0, cfg_.joints * 6);
    ad::Var gamma_i = ad::slice_cols(out, cfg_.joints * 6, 3);

    // rho applied before averaging: rotate the root joint's 6D columns,
    // rotate+translate gamma
    ad::Var R_i = ad::slice_rows(rho_rot, i, 1);
    ad::Var root_a = ad::row_rotate(R_i, ad::slice_cols(theta_i, 0, 3));
    ad::Var root_b = ad::row_rotate(R_i, ad::slice_cols(theta_i, 3, 3));
    ad::Var rest = ad::slice_cols(theta_i, 6, cfg_.joints * 6 - 6);
    ad::Var theta_rho = ad::concat_cols(ad::concat_cols(root_a, root_b), rest);
    ad::Var gamma_rho =
        ad::add(ad::row_rotate(R_i, gamma_i), ad::tile_rows(ad::slice_rows(rho_t, i, 1), n));

    fwd.mask.push_back(mask);
    fwd.seg_theta.push_back(theta_rho);
    fwd.seg_gamma.push_back(gamma_rho);

    ad::Var wt = ad::col_broadcast_mul(theta_rho, mask);
    ad::Var wg = ad::col_broadcast_mul(gamma_rho, mask);
    if (i == 0) {
      num_theta = wt;
      num_gamma = wg;
      den = mask;
    } else {
      num_theta = ad::add(num_theta, wt);
      num_gamma = ad::add(num_gamma, wg);
      den = ad::add(den, mask);
    }
  }
  if (den.val().minCoeff() <= 0.0) {
    raise(ErrorCode::ZeroWeightSum, "mask weights vanished");  // unreachable for gaussians
  }
  ad::Var inv_den = ad::reciprocal(den);
  fwd.theta = ad::col_broadcast_mul(num_theta, inv_den);
  fwd.gamma = ad::col_broadcast_mul(num_gamma, inv_den);
  return fwd;
}

PriorForward PriorModel::forward_t(nn::Graph& g, ad::Var theta, ad::Var gamma, ad::Var tau,
                                   ad::Var beta, const Eigen::MatrixXd& noise) const {
  auto [mu, log_sigma] = encode_t(g, theta, gamma, tau);
  if (noise.rows() != cfg_.m || noise.cols() != cfg_.latent_dim) {
    raise(ErrorCode::LengthMismatch, "noise must be m x D");
  }
  ad::Var eps = g.tape().constant(noise);
  ad::Var z = ad::add(mu, ad::mul(eps, ad::exp_(log_sigma)));
  PriorForward fwd = decode_t(g, z, beta, tau);
  fwd.mu = mu;
  fwd.log_sigma = log_sigma;
  return fwd;
}

LatentDistributionSequence PriorModel::encode(const FrameSequence& seq) const {
  ad::Tape tape;
  nn::Graph g(tape);
  ad::Var theta = tape.constant(seq.theta_matrix());
  ad::Var gamma = tape.constant(seq.gamma_matrix());
  Eigen::MatrixXd tau(seq.frames(), 1);
  for (int i = 0; i < seq.frames(); ++i) tau(i, 0) = seq.timestamps[i];
  auto [mu, log_sigma] = encode_t(g, theta, gamma, tape.constant(tau));
  return {mu.val(), log_sigma.val()};
}

LatentSequence PriorModel::sample(const LatentDistributionSequence& dist,
                                  const Eigen::MatrixXd& noise) {
  if (noise.rows() != dist.mu.rows() || noise.cols() != dist.mu.cols()) {
    raise(ErrorCode::LengthMismatch, "sample noise shape mismatch");
  }
  return {dist.mu + noise.cwiseProduct(dist.log_sigma.array().exp().matrix())};
}

std::pair<double, RigidTransform> PriorModel::segment_params(const Eigen::VectorXd& z_i,
                                                             const BodyShape& beta) const {
  if (z_i.size() != cfg_.latent_dim || beta.beta.size() != cfg_.shape_dims) {
    raise(ErrorCode::LengthMismatch, "segment_params input dims");
  }
  Eigen::RowVectorXd in(cfg_.latent_dim + cfg_.shape_dims);
  in << z_i.transpose(), beta.beta.transpose();
  const Eigen::RowVectorXd out = plain_mlp(seg_head_, in);
  RigidTransform rho;
  rho.rotation = Rot6D{Vec3(out[1], out[2], out[3]), Vec3(out[4], out[5], out[6])};
  rho.translation = Vec3(out[7], out[8], out[9]);
  return {out[0], rho};
}

SegmentLayout PriorModel::layout_for(const LatentSequence& z, const BodyShape& beta) const {
  const int m = static_cast<int>(z.z.rows());
  Eigen::VectorXd delta_raw(m);
  std::vector<RigidTransform> rho(m);
  for (int i = 0; i < m; ++i) {
    auto [raw, r] = segment_params(z.z.row(i).transpose(), beta);
    delta_raw[i] = raw;
    rho[i] = r;
  }
  return make_layout(delta_raw, std::move(rho));
}

std::pair<Pose, Vec3> PriorModel::decode_primitive(const Eigen::VectorXd& z_i,
                                                   const BodyShape& beta, double tau,
                                                   double Delta_i, double delta_i) const {
  if (z_i.size() != cfg_.latent_dim || beta.beta.size() != cfg_.shape_dims) {
    raise(ErrorCode::LengthMismatch, "decode_primitive input dims");
  }
  const double s = (tau - Delta_i) / delta_i;
  Eigen::RowVectorXd in(cfg_.latent_dim + cfg_.shape_dims + 1);
  in << z_i.transpose(), beta.beta.transpose(), s;
  const Eigen::RowVectorXd out = plain_mlp(prim_dec_, in);
  Pose pose = Pose::from_flat(out.head(cfg_.joints * 6).transpose());
  Vec3 gamma(out[cfg_.joints * 6], out[cfg_.joints * 6 + 1], out[cfg_.joints * 6 + 2]);
  return {pose, gamma};
}

FrameSequence PriorModel::decode(const LatentSequence& z, const BodyShape& beta,
                                 const std::vector<double>& timestamps) const {
  const int m = static_cast<int>(z.z.rows());
  const SegmentLayout layout = layout_for(z, beta);
  FrameSequence seq;
  seq.shape = beta;
  seq.timestamps = timestamps;
  for (double tau : timestamps) {
    std::vector<std::pair<Pose, Vec3>> segs;
    segs.reserve(m);
    for (int i = 0; i < m; ++i) {
      segs.push_back(decode_primitive(z.z.row(i).transpose(), beta, tau, layout.Delta[i],
                                      layout.delta[i]));
    }
    auto [pose, gamma] = combine(segs, layout, tau);
    seq.poses.push_back(std::move(pose));
    seq.displacements.push_back(gamma);
  }
  return seq;
}

}  // namespace lmp
