#pragma once

#include <string>
#include <vector>

#include "lmp/motion.hpp"
#include "lmp/nn.hpp"
#include "lmp/rng.hpp"

namespace lmp {

// Timestamped unordered 3D point sets; the completion input. Point counts
// may vary per frame.
struct PointCloudSequence {
  std::vector<double> timestamps;       // seconds
  std::vector<Eigen::MatrixXd> clouds;  // k_i x 3, metres

  int frames() const { return static_cast<int>(timestamps.size()); }
  double duration() const { return timestamps.back() - timestamps.front(); }
  void validate() const;
};

// Symmetric mean nearest-neighbour distance, reported in millimetres:
// 0.5 * [ mean_a min_b |p-q| + mean_b min_a |q-p| ] * 1000.
double chamfer(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Same quantity on the tape; `pred` is a P x 3 var, `target` a constant.
// Nearest-neighbour assignments are taken at the current values.
ad::Var chamfer_t(nn::Graph& g, ad::Var pred, const Eigen::MatrixXd& target);

// Uniform random point subset per frame plus nearest-timestamp frame
// selection at the target rate.
PointCloudSequence downsample(const PointCloudSequence& pcs, int points_per_frame, double fps,
                              Rng& rng);

// Deterministic synthetic observation: the body surface sampled per frame.
PointCloudSequence sample_surface_clouds(const FrameSequence& seq, const Skeleton& skel,
                                         int samples_per_bone);

// Manifest JSON + one xyz text file per frame, next to the manifest.
void save_pointcloud_sequence(const PointCloudSequence& pcs, const std::string& manifest_path,
                              const std::string& provenance = "");
PointCloudSequence load_pointcloud_sequence(const std::string& manifest_path);

}  // namespace lmp
