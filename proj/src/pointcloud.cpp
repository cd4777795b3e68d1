#include "lmp/pointcloud.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lmp/error.hpp"
#include "lmp/util.hpp"

namespace lmp {

namespace {

constexpr int kCloudFormatVersion = 1;

std::vector<Eigen::Index> nearest_indices(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to) {
  std::vector<Eigen::Index> idx(from.rows());
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = (to.row(0) - from.row(i)).squaredNorm();
    for (Eigen::Index j = 1; j < to.rows(); ++j) {
      const double d = (to.row(j) - from.row(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    idx[i] = best;
  }
  return idx;
}

}  // namespace

void PointCloudSequence::validate() const {
  if (frames() < 1 || clouds.size() != timestamps.size()) {
    raise(ErrorCode::LengthMismatch, "point cloud sequence field lengths disagree");
  }
  for (int i = 1; i < frames(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      raise(ErrorCode::UnnormalizedInput, "cloud timestamps must be strictly increasing");
    }
  }
  for (const auto& c : clouds) {
    if (c.rows() < 1 || c.cols() != 3) raise(ErrorCode::EmptyCloud, "every cloud must be k x 3, k >= 1");
  }
}

double chamfer(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() < 1 || b.rows() < 1) raise(ErrorCode::EmptyCloud, "chamfer needs nonempty clouds");
  double d_ab = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double best = (b.row(0) - a.row(i)).squaredNorm();
    for (Eigen::Index j = 1; j < b.rows(); ++j) {
      best = std::min(best, (b.row(j) - a.row(i)).squaredNorm());
    }
    d_ab += std::sqrt(best);
  }
  d_ab /= static_cast<double>(a.rows());
  double d_ba = 0.0;
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    double best = (a.row(0) - b.row(j)).squaredNorm();
    for (Eigen::Index i = 1; i < a.rows(); ++i) {
      best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
    }
    d_ba += std::sqrt(best);
  }
  d_ba /= static_cast<double>(b.rows());
  return 500.0 * (d_ab + d_ba);  // 0.5 * (sum) in mm
}

ad::Var chamfer_t(nn::Graph& g, ad::Var pred, const Eigen::MatrixXd& target) {
  if (pred.rows() < 1 || target.rows() < 1) {
    raise(ErrorCode::EmptyCloud, "chamfer needs nonempty clouds");
  }
  ad::Tape& t = g.tape();
  const Eigen::MatrixXd& pv = pred.val();

  // pred -> target direction: match each predicted point to its nearest
  // observation, then average the distances
  const auto idx_pt = nearest_indices(pv, target);
  Eigen::MatrixXd matched(pv.rows(), 3);
  for (Eigen::Index i = 0; i < pv.rows(); ++i) matched.row(i) = target.row(idx_pt[i]);
  ad::Var diff1 = ad::sub(pred, t.constant(matched));
  ad::Var d1 = ad::mean_all(ad::sqrt_(ad::add_scalar(ad::sum_rows(ad::square(diff1)), 1e-18)));

  // target -> pred direction via row gathering
  const auto idx_tp = nearest_indices(target, pv);
  ad::Var gathered = ad::gather_rows(pred, idx_tp);
  ad::Var diff2 = ad::sub(gathered, t.constant(target));
  ad::Var d2 = ad::mean_all(ad::sqrt_(ad::add_scalar(ad::sum_rows(ad::square(diff2)), 1e-18)));

  return ad::scale(ad::add(d1, d2), 500.0);
}

PointCloudSequence downsample(const PointCloudSequence& pcs, int points_per_frame, double fps,
                              Rng& rng) {
  pcs.validate();
  if (points_per_frame < 1 || fps <= 0.0) {
    raise(ErrorCode::InvalidConfig, "downsample needs positive resolution");
  }
  for (const auto& c : pcs.clouds) {
    if (c.rows() < points_per_frame) {
      raise(ErrorCode::ResolutionTooHigh, "requested more points per frame than the source has");
    }
  }
  const double src_fps = pcs.frames() < 2
                             ? fps
                             : static_cast<double>(pcs.frames() - 1) / pcs.duration();
  if (fps > src_fps + 1e-9) {
    raise(ErrorCode::ResolutionTooHigh, "requested fps exceeds the source frame rate");
  }

  PointCloudSequence out;
  const double t0 = pcs.timestamps.front();
  const double t_end = pcs.timestamps.back();
  for (int k = 0;; ++k) {
    const double target_t = t0 + static_cast<double>(k) / fps;
    if (target_t > t_end + 1e-9) break;
    // nearest source frame
    int best = 0;
    double best_d = std::abs(pcs.timestamps[0] - target_t);
    for (int i = 1; i < pcs.frames(); ++i) {
      const double d = std::abs(pcs.timestamps[i] - target_t);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const Eigen::MatrixXd& src = pcs.clouds[best];
    // partial Fisher-Yates draw of a uniform subset
    std::vector<Eigen::Index> pool(src.rows());
    for (Eigen::Index i = 0; i < src.rows(); ++i) pool[i] = i;
    Eigen::MatrixXd cloud(points_per_frame, 3);
    for (int i = 0; i < points_per_frame; ++i) {
      const std::size_t pick = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[pick]);
      cloud.row(i) = src.row(pool[i]);
    }
    out.timestamps.push_back(pcs.timestamps[best]);
    out.clouds.push_back(std::move(cloud));
  }
  return out;
}

PointCloudSequence sample_surface_clouds(const FrameSequence& seq, const Skeleton& skel,
                                         int samples_per_bone) {
  seq.validate();
  PointCloudSequence out;
  out.timestamps = seq.timestamps;
  for (int i = 0; i < seq.frames(); ++i) {
    const auto pts =
        surface_points(seq.poses[i], seq.displacements[i], seq.shape, skel, samples_per_bone);
    Eigen::MatrixXd cloud(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t p = 0; p < pts.size(); ++p) cloud.row(static_cast<Eigen::Index>(p)) = pts[p].transpose();
    out.clouds.push_back(std::move(cloud));
  }
  return out;
}

void save_pointcloud_sequence(const PointCloudSequence& pcs, const std::string& manifest_path,
                              const std::string& provenance) {
  pcs.validate();
  namespace fs = std::filesystem;
  const fs::path manifest(manifest_path);
  const fs::path dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  if (!dir.empty()) fs::create_directories(dir);

  nlohmann::json j;
  j["format_version"] = kCloudFormatVersion;
  j["units"] = "metres";
  if (!provenance.empty()) j["provenance"] = provenance;
  auto frames = nlohmann::json::array();
  for (int i = 0; i < pcs.frames(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_f%05d.xyz", stem.c_str(), i);
    const fs::path file = dir / name;
    std::ofstream out(file);
    if (!out) raise(ErrorCode::IoError, "cannot write cloud file " + file.string());
    const Eigen::MatrixXd& c = pcs.clouds[i];
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      out << format_g17(c(r, 0)) << " " << format_g17(c(r, 1)) << " " << format_g17(c(r, 2))
          << "\n";
    }
    nlohmann::json f;
    f["t"] = pcs.timestamps[i];
    f["file"] = std::string(name);
    f["count"] = c.rows();
    frames.push_back(std::move(f));
  }
  j["frames"] = std::move(frames);
  std::ofstream out(manifest);
  if (!out) raise(ErrorCode::IoError, "cannot write manifest " + manifest_path);
  out << j.dump(1) << "\n";
}

PointCloudSequence load_pointcloud_sequence(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) raise(ErrorCode::IoError, "cannot open manifest " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("cloud manifest: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kCloudFormatVersion) {
    raise(ErrorCode::SchemaVersionMismatch, "unsupported cloud manifest format_version");
  }
  if (!j.contains("frames")) raise(ErrorCode::ParseError, "cloud manifest missing field frames");
  const fs::path dir = fs::path(manifest_path).parent_path();
  PointCloudSequence pcs;
  for (const auto& f : j["frames"]) {
    for (const char* field : {"t", "file"}) {
      if (!f.contains(field)) {
        raise(ErrorCode::ParseError, std::string("cloud frame missing field ") + field);
      }
    }
    pcs.timestamps.push_back(f["t"].get<double>());
    const fs::path file = dir / f["file"].get<std::string>();
    std::ifstream cin(file);
    if (!cin) raise(ErrorCode::IoError, "cannot open cloud file " + file.string());
    std::vector<Vec3> pts;
    double x, y, z;
    while (cin >> x >> y >> z) pts.emplace_back(x, y, z);
    if (pts.empty()) raise(ErrorCode::EmptyCloud, "empty cloud file " + file.string());
    Eigen::MatrixXd cloud(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t p = 0; p < pts.size(); ++p) cloud.row(static_cast<Eigen::Index>(p)) = pts[p].transpose();
    pcs.clouds.push_back(std::move(cloud));
  }
  pcs.validate();
  return pcs;
}

}  // namespace lmp
