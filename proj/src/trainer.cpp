#include "lmp/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "lmp/error.hpp"
#include "lmp/util.hpp"

namespace lmp {

void TrainConfig::validate() const {
  if (batch_size < 1 || n_frames < 2 || total_epochs < 1 || plateau_patience < 1 ||
      lambda_3D_switch_epoch < 0 || lr_stages.empty()) {
    raise(ErrorCode::InvalidConfig, "train config fields must be positive");
  }
  if (duration_min <= 0.0 || duration_max < duration_min) {
    raise(ErrorCode::InvalidConfig, "train config duration range invalid");
  }
}

PlateauScheduler::PlateauScheduler(std::vector<double> stages, int patience)
    : stages_(std::move(stages)),
      patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {
  if (stages_.empty()) raise(ErrorCode::InvalidConfig, "scheduler needs at least one rate");
}

bool PlateauScheduler::observe(double epoch_loss) {
  if (epoch_loss < best_) {
    best_ = epoch_loss;
    since_best_ = 0;
    return false;
  }
  ++since_best_;
  if (since_best_ >= patience_ && stage_ + 1 < stages_.size()) {
    ++stage_;
    since_best_ = 0;
    return true;
  }
  return false;
}

FrameSequence sample_subsequence(const FrameSequence& source, Rng& rng, const TrainConfig& cfg) {
  source.validate();
  const double duration = rng.uniform(cfg.duration_min, cfg.duration_max);
  if (source.duration() < duration - 1e-9) {
    raise(ErrorCode::SourceTooShort, "source sequence shorter than sampled duration");
  }
  const double slack = std::max(0.0, source.duration() - duration);
  const double start = source.timestamps.front() + rng.uniform(0.0, slack);
  std::vector<double> ts(cfg.n_frames);
  for (int k = 0; k < cfg.n_frames; ++k) {
    ts[k] = start + duration * static_cast<double>(k) / static_cast<double>(cfg.n_frames - 1);
  }
  ts.back() = std::min(ts.back(), source.timestamps.back());
  return resample(source, ts);
}

std::string epoch_log_header() { return "epoch,L_global,L_segment,L_KL,L_reg,lr,lambda_3D"; }

std::string epoch_log_row(const EpochLog& log) {
  return std::to_string(log.epoch) + "," + format_g17(log.L_global) + "," +
         format_g17(log.L_segment) + "," + format_g17(log.L_KL) + "," + format_g17(log.L_reg) +
         "," + format_g17(log.lr) + "," + format_g17(log.lambda_3D);
}

TrainResult train_prior(PriorModel& model, const std::vector<FrameSequence>& dataset,
                        const Skeleton& skel, const TrainConfig& cfg,
                        const std::string& loss_csv_path, const std::string& provenance,
                        const std::function<void(int)>& on_epoch) {
  cfg.validate();
  if (dataset.empty()) raise(ErrorCode::EmptyInput, "training dataset is empty");
  const ModelConfig& mc = model.config();

  std::ofstream csv;
  if (!loss_csv_path.empty()) {
    csv.open(loss_csv_path);
    if (!csv) raise(ErrorCode::IoError, "cannot write loss csv " + loss_csv_path);
    if (!provenance.empty()) csv << "# " << provenance << "\n";
    csv << epoch_log_header() << "\n";
  }

  Rng rng(cfg.seed);
  PlateauScheduler scheduler(cfg.lr_stages, cfg.plateau_patience);
  nn::Adam adam;
  TrainResult result;

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    const double lambda_3D = epoch > cfg.lambda_3D_switch_epoch ? 1.0 : 0.0;
    LossWeights w;
    w.lambda_KL = cfg.lambda_KL;
    w.lambda_reg = cfg.lambda_reg;
    w.lambda_3D = lambda_3D;

    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }

    double sum_global = 0.0, sum_segment = 0.0, sum_kl = 0.0, sum_reg = 0.0;
    std::size_t processed = 0;

    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(cfg.batch_size));
      std::unordered_map<nn::Param*, ad::Mat> grad_acc;
      const double inv_batch = 1.0 / static_cast<double>(batch_end - batch_start);

      for (std::size_t bi = batch_start; bi < batch_end; ++bi) {
        const FrameSequence sub = sample_subsequence(dataset[order[bi]], rng, cfg);
        auto [norm, info] = normalize(sub);

        Eigen::MatrixXd noise(mc.m, mc.latent_dim);
        for (Eigen::Index k = 0; k < noise.size(); ++k) noise(k) = rng.normal();

        ad::Tape tape;
        nn::Graph g(tape);
        ad::Var theta = tape.constant(norm.theta_matrix());
        ad::Var gamma = tape.constant(norm.gamma_matrix());
        Eigen::MatrixXd tau_m(norm.frames(), 1);
        for (int k = 0; k < norm.frames(); ++k) tau_m(k, 0) = norm.timestamps[k];
        ad::Var tau = tape.constant(tau_m);
        ad::Var beta = tape.constant(norm.shape.beta.transpose());

        PriorForward fwd = model.forward_t(g, theta, gamma, tau, beta, noise);
        LossVars losses = training_loss_t(g, fwd, norm, info, skel,
                                          mc.surface_samples_per_bone, w);
        const double total = losses.total.scalar();
        if (!std::isfinite(total)) {
          raise(ErrorCode::NonFiniteLoss,
                "non-finite loss at epoch " + std::to_string(epoch) + ", sequence " +
                    std::to_string(order[bi]));
        }
        tape.backward(losses.total);
        for (const auto& [param, var] : g.bindings()) {
          const ad::Mat& pg = var.grad();
          if (pg.size() == 0) continue;
          auto it = grad_acc.find(param);
          if (it == grad_acc.end()) {
            grad_acc.emplace(param, pg * inv_batch);
          } else {
            it->second += pg * inv_batch;
          }
        }
        sum_global += losses.global.scalar();
        sum_segment += losses.segment.scalar();
        sum_kl += losses.kl.scalar();
        sum_reg += losses.reg.scalar();
        ++processed;
      }

      std::vector<std::pair<nn::Param*, ad::Mat>> grads;
      grads.reserve(grad_acc.size());
      for (const auto& p : model.params().all()) {
        auto it = grad_acc.find(p.get());
        if (it != grad_acc.end()) grads.emplace_back(p.get(), std::move(it->second));
      }
      adam.step(grads, scheduler.lr());
    }

    const double inv_n = 1.0 / static_cast<double>(processed);
    EpochLog log{epoch,           sum_global * inv_n, sum_segment * inv_n, sum_kl * inv_n,
                 sum_reg * inv_n, scheduler.lr(),     lambda_3D};
    result.history.push_back(log);
    if (csv.is_open()) {
      csv << epoch_log_row(log) << "\n";
      csv.flush();
    }

    const double epoch_total =
        log.L_global + log.L_segment + cfg.lambda_KL * log.L_KL + cfg.lambda_reg * log.L_reg;
    scheduler.observe(epoch_total);
    if (on_epoch) on_epoch(epoch);
  }
  return result;
}

}  // namespace lmp
