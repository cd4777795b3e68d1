#include "lmp/completion.hpp"

#include <cmath>
#include <unordered_map>

#include "lmp/error.hpp"

namespace lmp {

namespace {

std::vector<Eigen::Index> to_index(const std::vector<int>& v) {
  return std::vector<Eigen::Index>(v.begin(), v.end());
}

Eigen::MatrixXd column(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

// denormalization of gamma as a per-axis affine map on the tape
ad::Var denormalize_gamma_t(nn::Graph& g, ad::Var gamma, const NormalizationInfo& info) {
  Eigen::RowVector3d scale, offset;
  for (int a = 0; a < 3; ++a) {
    if (info.constant_axis[a]) {
      scale[a] = 0.0;
      offset[a] = info.gamma_min[a];
    } else {
      scale[a] = 0.5 * (info.gamma_max[a] - info.gamma_min[a]);
      offset[a] = info.gamma_min[a] + scale[a];
    }
  }
  ad::Tape& t = g.tape();
  return ad::row_broadcast_add(ad::row_broadcast_mul(gamma, t.constant(scale)),
                               t.constant(offset));
}

Vec3 mean_centroid(const PointCloudSequence& pcs) {
  Vec3 c = Vec3::Zero();
  for (const auto& cloud : pcs.clouds) c += cloud.colwise().mean().transpose();
  return c / static_cast<double>(pcs.frames());
}

}  // namespace

void CompletionConfig::validate() const {
  if (lambda_prior < 0.0 || iterations < 1 || step_size <= 0.0 || output_fps <= 0.0 ||
      early_stop_rel < 0.0) {
    raise(ErrorCode::InvalidConfig, "completion config fields must be positive");
  }
}

InitEncoder::InitEncoder(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const int d = cfg_.model_width();
  point_mlp_ = nn::Mlp::create(params_, "init.point", 3, to_index(cfg_.point_hidden),
                               cfg_.embed_dim, nn::Act::Gelu, rng);
  seq2set_ = nn::SeqToSet::create(params_, "init.seq", d, cfg_.m, cfg_.encoder_layers, cfg_.heads,
                                  cfg_.ff_width, rng);
  head_z_ = nn::Linear::create(params_, "init.head.z", d, cfg_.latent_dim, rng);
  head_beta_ = nn::Linear::create(params_, "init.head.beta", d, cfg_.shape_dims, rng);
}

std::pair<ad::Var, ad::Var> InitEncoder::forward_t(nn::Graph& g,
                                                   const std::vector<ad::Var>& clouds,
                                                   ad::Var tau) const {
  if (clouds.empty() || static_cast<Eigen::Index>(clouds.size()) != tau.rows()) {
    raise(ErrorCode::LengthMismatch, "init encoder needs one cloud per timestamp");
  }
  // shared per-point map + max pooling: exactly permutation invariant
  ad::Var tokens;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    ad::Var feat = ad::max_cols(point_mlp_(g, clouds[i]));  // 1 x E
    tokens = i == 0 ? feat : ad::concat_rows(tokens, feat);
  }
  tokens = ad::concat_cols(tokens, tau);
  ad::Var out = seq2set_(g, tokens);  // m x d
  ad::Var z = head_z_(g, out);
  ad::Var pooled = ad::scale(ad::sum_cols(out), 1.0 / static_cast<double>(cfg_.m));
  ad::Var beta = head_beta_(g, pooled);
  return {z, beta};
}

std::pair<LatentSequence, BodyShape> InitEncoder::encode(
    const std::vector<Eigen::MatrixXd>& centered_clouds,
    const std::vector<double>& tau_norm) const {
  ad::Tape tape;
  nn::Graph g(tape);
  std::vector<ad::Var> cloud_vars;
  cloud_vars.reserve(centered_clouds.size());
  for (const auto& c : centered_clouds) cloud_vars.push_back(tape.constant(c));
  auto [z, beta] = forward_t(g, cloud_vars, tape.constant(column(tau_norm)));
  return {LatentSequence{z.val()}, BodyShape{beta.val().row(0).transpose()}};
}

NormalizationInfo estimate_normalization(const PointCloudSequence& pcs, const Skeleton& skel) {
  pcs.validate();
  if (pcs.frames() < 2) raise(ErrorCode::LengthMismatch, "need at least 2 cloud frames");
  // centroid-to-root offset of the rest body, used to move the centroid
  // trajectory down to an approximate root trajectory
  Pose rest(skel.joints());
  const auto rest_pts = surface_points(rest, Vec3::Zero(), BodyShape{}, skel, 2);
  Vec3 rest_centroid = Vec3::Zero();
  for (const auto& p : rest_pts) rest_centroid += p;
  rest_centroid /= static_cast<double>(rest_pts.size());

  NormalizationInfo info;
  info.tau_start = pcs.timestamps.front();
  info.tau_end = pcs.timestamps.back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& cloud : pcs.clouds) {
    const Vec3 root_est = cloud.colwise().mean().transpose() - rest_centroid;
    lo = lo.cwiseMin(root_est);
    hi = hi.cwiseMax(root_est);
  }
  // slack floor: keep every axis optimizable even when the subject is static
  constexpr double kMinRange = 0.1;
  for (int a = 0; a < 3; ++a) {
    if (hi[a] - lo[a] < kMinRange) {
      const double center = 0.5 * (lo[a] + hi[a]);
      lo[a] = center - kMinRange / 2.0;
      hi[a] = center + kMinRange / 2.0;
    }
  }
  info.gamma_min = lo;
  info.gamma_max = hi;
  info.constant_axis = {false, false, false};
  return info;
}

std::pair<LatentSequence, BodyShape> init_encode(const InitEncoder& enc,
                                                 const PointCloudSequence& pcs,
                                                 const Skeleton& skel) {
  (void)skel;
  pcs.validate();
  if (!enc.trained()) {
    raise(ErrorCode::UntrainedInitEncoder, "initialization encoder has not been trained");
  }
  const Vec3 center = mean_centroid(pcs);
  std::vector<Eigen::MatrixXd> centered;
  centered.reserve(pcs.clouds.size());
  for (const auto& c : pcs.clouds) {
    Eigen::MatrixXd cc = c;
    cc.rowwise() -= center.transpose();
    centered.push_back(std::move(cc));
  }
  std::vector<double> tau_norm(pcs.frames());
  const double span = pcs.duration();
  for (int i = 0; i < pcs.frames(); ++i) {
    tau_norm[i] = (pcs.timestamps[i] - pcs.timestamps.front()) / span;
  }
  return enc.encode(centered, tau_norm);
}

void train_init_encoder(InitEncoder& enc, const PriorModel& frozen_prior,
                        const std::vector<FrameSequence>& dataset, const Skeleton& skel,
                        const TrainConfig& sampling_cfg, const InitTrainConfig& icfg) {
  if (dataset.empty()) raise(ErrorCode::EmptyInput, "init encoder dataset is empty");
  if (icfg.epochs < 1 || icfg.points_per_frame < 1 || icfg.fps <= 0.0) {
    raise(ErrorCode::InvalidConfig, "init train config fields must be positive");
  }
  Rng rng(icfg.seed);
  nn::Adam adam;
  const int J = skel.joints();
  const int spb_clouds =
      (icfg.points_per_frame + J - 2) / (J - 1);  // enough samples to subsample from

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= icfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    for (std::size_t si : order) {
      const FrameSequence sub = sample_subsequence(dataset[si], rng, sampling_cfg);
      auto [norm, info] = normalize(sub);

      PointCloudSequence clouds = sample_surface_clouds(sub, skel, spb_clouds);
      clouds = downsample(clouds, icfg.points_per_frame, icfg.fps, rng);
      const Vec3 center = mean_centroid(clouds);

      ad::Tape tape;
      nn::Graph g(tape);
      std::vector<ad::Var> cloud_vars;
      cloud_vars.reserve(clouds.clouds.size());
      for (const auto& c : clouds.clouds) {
        Eigen::MatrixXd cc = c;
        cc.rowwise() -= center.transpose();
        cloud_vars.push_back(tape.constant(cc));
      }
      std::vector<double> tau_cloud(clouds.frames());
      for (int k = 0; k < clouds.frames(); ++k) {
        tau_cloud[k] = info.normalize_tau(clouds.timestamps[k]);
      }
      auto [z, beta_hat] = enc.forward_t(g, cloud_vars, tape.constant(column(tau_cloud)));

      // decode through the frozen prior at the full subsequence timestamps
      PriorForward fwd =
          frozen_prior.decode_t(g, z, beta_hat, tape.constant(column(norm.timestamps)));
      ad::Var theta_gt = tape.constant(norm.theta_matrix());
      ad::Var gamma_gt = tape.constant(norm.gamma_matrix());
      ad::Var loss = ad::scale(ad::add(ad::sum_all(ad::square(ad::sub(fwd.theta, theta_gt))),
                                       ad::sum_all(ad::square(ad::sub(fwd.gamma, gamma_gt)))),
                               1.0 / norm.frames());
      if (!std::isfinite(loss.scalar())) {
        raise(ErrorCode::NonFiniteLoss,
              "init encoder loss diverged at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);

      // update only the init encoder's parameters; the prior stays frozen
      std::vector<std::pair<nn::Param*, ad::Mat>> grads;
      std::unordered_map<nn::Param*, ad::Var> bound;
      for (const auto& [param, var] : g.bindings()) bound.emplace(param, var);
      for (const auto& p : enc.params().all()) {
        auto it = bound.find(p.get());
        if (it == bound.end()) continue;
        const ad::Mat& pg = it->second.grad();
        if (pg.size() != 0) grads.emplace_back(p.get(), pg);
      }
      adam.step(grads, icfg.lr);
    }
  }
  enc.set_trained(true);
}

namespace {

struct ObjectiveEval {
  double total = 0.0;
  double cham = 0.0;
  ad::Mat dz;
  ad::Mat dbeta;
};

// One completion-objective evaluation; gradients w.r.t. (z, beta) on demand.
ObjectiveEval eval_objective(const PriorModel& prior, const Skeleton& skel,
                             const PointCloudSequence& pcs, const NormalizationInfo& info,
                             const Eigen::MatrixXd& z, const Eigen::MatrixXd& beta,
                             const Eigen::MatrixXd& z0, double lambda_prior, bool want_grads) {
  ad::Tape tape;
  nn::Graph g(tape);
  ad::Var z_var = want_grads ? tape.leaf(z) : tape.constant(z);
  ad::Var beta_var = want_grads ? tape.leaf(beta) : tape.constant(beta);

  std::vector<double> tau_norm(pcs.frames());
  for (int i = 0; i < pcs.frames(); ++i) tau_norm[i] = info.normalize_tau(pcs.timestamps[i]);
  PriorForward fwd = prior.decode_t(g, z_var, beta_var, tape.constant(column(tau_norm)));

  ad::Var gamma_m = denormalize_gamma_t(g, fwd.gamma, info);
  FkVars fk = forward_kinematics_t(g, skel, fwd.theta, gamma_m, beta_var);
  std::vector<ad::Var> pts =
      surface_points_t(g, skel, fk, beta_var, prior.config().surface_samples_per_bone);

  ad::Var cham_acc;
  for (int i = 0; i < pcs.frames(); ++i) {
    ad::Var frame_pts = ad::stack_row(pts, i);
    ad::Var c = chamfer_t(g, frame_pts, pcs.clouds[i]);
    cham_acc = i == 0 ? c : ad::add(cham_acc, c);
  }
  ad::Var cham = ad::scale(cham_acc, 1.0 / pcs.frames());
  ad::Var prior_term = ad::sum_all(ad::square(ad::sub(z_var, tape.constant(z0))));
  ad::Var total = ad::add(cham, ad::scale(prior_term, lambda_prior));

  ObjectiveEval out;
  out.total = total.scalar();
  out.cham = cham.scalar();
  if (!std::isfinite(out.total)) {
    raise(ErrorCode::NonFiniteObjective, "completion objective is not finite");
  }
  if (want_grads) {
    tape.backward(total);
    out.dz = z_var.grad();
    out.dbeta = beta_var.grad();
    if (out.dz.size() == 0) out.dz = ad::Mat::Zero(z.rows(), z.cols());
    if (out.dbeta.size() == 0) out.dbeta = ad::Mat::Zero(beta.rows(), beta.cols());
  }
  return out;
}

}  // namespace

CompletionResult complete(const PriorModel& prior, const InitEncoder& init, const Skeleton& skel,
                          const PointCloudSequence& pcs, const CompletionConfig& cfg) {
  cfg.validate();
  pcs.validate();
  if (pcs.frames() < 2) raise(ErrorCode::LengthMismatch, "completion needs at least 2 frames");

  const NormalizationInfo info = estimate_normalization(pcs, skel);
  auto [z_init, beta_init] = init_encode(init, pcs, skel);

  Eigen::MatrixXd z = z_init.z;
  Eigen::MatrixXd beta = beta_init.beta.transpose();
  const Eigen::MatrixXd z0 = z_init.z;

  // Adam on (z, beta) only, with step-halving so accepted steps never
  // increase the objective
  Eigen::MatrixXd mz = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  Eigen::MatrixXd vz = mz;
  Eigen::MatrixXd mb = Eigen::MatrixXd::Zero(1, beta.cols());
  Eigen::MatrixXd vb = mb;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  ObjectiveEval cur = eval_objective(prior, skel, pcs, info, z, beta, z0, cfg.lambda_prior, false);
  const double chamfer_initial = cur.cham;
  double obj = cur.total;

  int used = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    ObjectiveEval ev = eval_objective(prior, skel, pcs, info, z, beta, z0, cfg.lambda_prior, true);
    mz = b1 * mz + (1.0 - b1) * ev.dz;
    vz = b2 * vz + (1.0 - b2) * ev.dz.cwiseProduct(ev.dz);
    mb = b1 * mb + (1.0 - b1) * ev.dbeta;
    vb = b2 * vb + (1.0 - b2) * ev.dbeta.cwiseProduct(ev.dbeta);
    const double c1 = 1.0 - std::pow(b1, it);
    const double c2 = 1.0 - std::pow(b2, it);

    double lr = cfg.step_size;
    bool accepted = false;
    double new_obj = obj, new_cham = cur.cham;
    Eigen::MatrixXd z_new, beta_new;
    for (int attempt = 0; attempt < 12; ++attempt) {
      z_new = z.array() - lr * (mz / c1).array() / ((vz / c2).array().sqrt() + eps);
      beta_new = beta.array() - lr * (mb / c1).array() / ((vb / c2).array().sqrt() + eps);
      ObjectiveEval cand =
          eval_objective(prior, skel, pcs, info, z_new, beta_new, z0, cfg.lambda_prior, false);
      if (!cfg.monotone || cand.total <= obj) {
        accepted = true;
        new_obj = cand.total;
        new_cham = cand.cham;
        break;
      }
      lr /= 2.0;
    }
    if (!accepted) break;  // no descent at this scale
    z = std::move(z_new);
    beta = std::move(beta_new);
    used = it;
    const double rel = std::abs(obj - new_obj) / std::max(1.0, std::abs(obj));
    obj = new_obj;
    cur.cham = new_cham;
    if (rel < cfg.early_stop_rel) break;
  }

  CompletionResult result;
  result.chamfer_initial = chamfer_initial;
  result.chamfer_final = cur.cham;
  result.iterations_used = used;
  result.z = LatentSequence{z};
  result.beta = BodyShape{beta.row(0).transpose()};
  result.info = info;

  // dense decode at the requested rate over the input span
  const double span = pcs.duration();
  const int n_out = std::max(2, static_cast<int>(std::lround(span * cfg.output_fps)));
  std::vector<double> ts_norm(n_out);
  for (int k = 0; k < n_out; ++k) {
    ts_norm[k] = static_cast<double>(k) / (cfg.output_fps * span);
  }
  FrameSequence dense = prior.decode(result.z, result.beta, ts_norm);
  result.motion = denormalize(dense, info);
  return result;
}

}  // namespace lmp
