#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lmp/losses.hpp"
#include "lmp/prior.hpp"

namespace lmp {

struct TrainConfig {
  int batch_size = 16;
  int n_frames = 100;
  double duration_min = 3.0;
  double duration_max = 5.0;
  std::vector<double> lr_stages = {1e-4, 1e-5, 1e-6};
  int plateau_patience = 20;
  int lambda_3D_switch_epoch = 500;  // lambda_3D is 0 through this epoch, 1 after
  int total_epochs = 1000;
  std::uint64_t seed = 0;
  double lambda_KL = 1e-4;
  double lambda_reg = 1e-2;
  int checkpoint_every = 100;

  void validate() const;
};

// Steps through the configured learning rates after `patience` consecutive
// epochs without a new running-minimum of the training loss.
class PlateauScheduler {
 public:
  PlateauScheduler(std::vector<double> stages, int patience);
  double lr() const { return stages_[stage_]; }
  // feed one epoch loss; returns true when the rate dropped
  bool observe(double epoch_loss);

 private:
  std::vector<double> stages_;
  std::size_t stage_ = 0;
  int patience_;
  int since_best_ = 0;
  double best_;
};

// One uniformly drawn 3-5 s window, resampled to exactly n_frames frames.
FrameSequence sample_subsequence(const FrameSequence& source, Rng& rng, const TrainConfig& cfg);

struct EpochLog {
  int epoch;
  double L_global;
  double L_segment;
  double L_KL;
  double L_reg;
  double lr;
  double lambda_3D;
};

std::string epoch_log_header();
std::string epoch_log_row(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> history;
};

// CVAE training loop: per-sequence graphs, gradients averaged over the
// minibatch, Adam updates, staged lambda_3D, plateau learning rate.
// `on_epoch` (optional) runs after each epoch, e.g. to write checkpoints.
TrainResult train_prior(PriorModel& model, const std::vector<FrameSequence>& dataset,
                        const Skeleton& skel, const TrainConfig& cfg,
                        const std::string& loss_csv_path = "",
                        const std::string& provenance = "",
                        const std::function<void(int)>& on_epoch = nullptr);

}  // namespace lmp
