#include "lmp/dataset.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include <json.hpp>

#include "lmp/error.hpp"

namespace lmp {

namespace {

constexpr int kMotionFormatVersion = 1;
constexpr double kPelvisHeight = 0.9;
constexpr double kBlendWindow = 0.3;  // seconds of cross-blend in composites

Rot6D rot_x(double a) {
  Mat3 R;
  R << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return matrix_to_rot6d(R);
}
Rot6D rot_y(double a) {
  Mat3 R;
  R << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return matrix_to_rot6d(R);
}
Rot6D rot_z(double a) {
  Mat3 R;
  R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return matrix_to_rot6d(R);
}
Rot6D compose(const Rot6D& first, const Rot6D& second) {
  return matrix_to_rot6d(rot6d_to_matrix(first) * rot6d_to_matrix(second));
}

// Joint indices of the default skeleton.
enum : int {
  kPelvis = 0, kSpine1 = 1, kSpine2 = 2, kChest = 3, kNeck = 4, kHead = 5,
  kLCollar = 6, kLShoulder = 7, kLElbow = 8, kLWrist = 9,
  kRCollar = 10, kRShoulder = 11, kRElbow = 12, kRWrist = 13,
  kLHip = 14, kLKnee = 15, kLAnkle = 16, kRHip = 17, kRKnee = 18, kRAnkle = 19,
};

void apply_baseline(Pose& pose) {
  pose.theta[kLShoulder] = rot_z(-1.2);  // arms down from the T-pose
  pose.theta[kRShoulder] = rot_z(1.2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  return x;
}

GaitParams draw_params(MotionKind kind, std::uint64_t seed) {
  Rng rng(seed);
  GaitParams p;
  switch (kind) {
    case MotionKind::WalkLine:
      p.frequency = rng.uniform(1.4, 1.8);
      p.amplitude = rng.uniform(0.45, 0.6);
      p.speed = rng.uniform(0.9, 1.4);
      break;
    case MotionKind::WalkCircle:
      p.frequency = rng.uniform(1.4, 1.8);
      p.amplitude = rng.uniform(0.45, 0.6);
      p.speed = rng.uniform(0.9, 1.3);
      p.turn_rate = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.4, 0.7);
      break;
    case MotionKind::RunArc:
      p.frequency = rng.uniform(2.2, 2.6);
      p.amplitude = rng.uniform(0.7, 0.9);
      p.speed = rng.uniform(2.0, 2.6);
      p.turn_rate = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.15, 0.3);
      break;
    case MotionKind::WaveArm:
      p.frequency = rng.uniform(1.5, 2.5);
      p.amplitude = rng.uniform(0.5, 0.8);
      break;
    case MotionKind::Squat:
      p.frequency = rng.uniform(0.4, 0.6);
      p.amplitude = rng.uniform(0.8, 1.1);
      break;
    case MotionKind::Idle:
      p.amplitude = rng.uniform(-0.15, 0.15);
      break;
    case MotionKind::Composite:
      break;
  }
  return p;
}

using ProgramFn = std::function<void(double t, Pose& pose, Vec3& gamma)>;

ProgramFn make_program(MotionKind kind, const GaitParams& p, int joints);

ProgramFn make_gait(const GaitParams& p, bool run) {
  const double w = 2.0 * M_PI * p.frequency;
  const double bounce = run ? 0.05 : 0.02;
  return [p, w, bounce](double t, Pose& pose, Vec3& gamma) {
    const double s = std::sin(w * t);
    pose.theta[kLHip] = rot_x(p.amplitude * s);
    pose.theta[kRHip] = rot_x(-p.amplitude * s);
    pose.theta[kLKnee] = rot_x(0.6 * p.amplitude * (1.0 + std::sin(w * t + M_PI_2)) / 2.0);
    pose.theta[kRKnee] = rot_x(0.6 * p.amplitude * (1.0 + std::sin(w * t - M_PI_2)) / 2.0);
    pose.theta[kLShoulder] = compose(rot_z(-1.2), rot_x(-0.5 * p.amplitude * s));
    pose.theta[kRShoulder] = compose(rot_z(1.2), rot_x(0.5 * p.amplitude * s));
    pose.theta[kLElbow] = rot_x(0.2 * p.amplitude * (1.0 - s) / 2.0);
    pose.theta[kRElbow] = rot_x(0.2 * p.amplitude * (1.0 + s) / 2.0);
    pose.theta[kSpine2] = rot_y(0.1 * s);
    double heading = 0.0;
    Vec3 travel;
    if (std::abs(p.turn_rate) > 1e-9) {
      heading = p.turn_rate * t;
      const double r = p.speed / p.turn_rate;
      travel = Vec3(r * (1.0 - std::cos(heading)), 0.0, r * std::sin(heading));
    } else {
      travel = Vec3(0.0, 0.0, p.speed * t);
    }
    pose.theta[kPelvis] = rot_y(heading);
    gamma = travel + Vec3(0.0, kPelvisHeight + bounce * std::sin(2.0 * w * t), 0.0);
  };
}

ProgramFn make_program(MotionKind kind, const GaitParams& p, int joints) {
  switch (kind) {
    case MotionKind::WalkLine:
    case MotionKind::WalkCircle:
      return make_gait(p, false);
    case MotionKind::RunArc:
      return make_gait(p, true);
    case MotionKind::WaveArm: {
      const double w = 2.0 * M_PI * p.frequency;
      return [p, w](double t, Pose& pose, Vec3& gamma) {
        apply_baseline(pose);
        pose.theta[kLShoulder] = rot_z(0.4);  // raised arm
        pose.theta[kLElbow] = compose(rot_z(0.9), rot_x(p.amplitude * std::sin(w * t)));
        pose.theta[kChest] = rot_y(0.08 * std::sin(0.5 * w * t));
        gamma = Vec3(0.0, kPelvisHeight, 0.0);
      };
    }
    case MotionKind::Squat: {
      const double w = 2.0 * M_PI * p.frequency;
      return [p, w](double t, Pose& pose, Vec3& gamma) {
        apply_baseline(pose);
        const double c = (1.0 - std::cos(w * t)) / 2.0;
        pose.theta[kLHip] = rot_x(-p.amplitude * c);
        pose.theta[kRHip] = rot_x(-p.amplitude * c);
        pose.theta[kLKnee] = rot_x(1.6 * p.amplitude * c);
        pose.theta[kRKnee] = rot_x(1.6 * p.amplitude * c);
        pose.theta[kLAnkle] = rot_x(-0.6 * p.amplitude * c);
        pose.theta[kRAnkle] = rot_x(-0.6 * p.amplitude * c);
        pose.theta[kLShoulder] = compose(rot_z(-1.2), rot_x(-0.6 * c));
        pose.theta[kRShoulder] = compose(rot_z(1.2), rot_x(-0.6 * c));
        gamma = Vec3(0.0, kPelvisHeight - 0.3 * c, 0.0);
      };
    }
    case MotionKind::Idle:
      return [p](double, Pose& pose, Vec3& gamma) {
        apply_baseline(pose);
        pose.theta[kHead] = rot_y(p.amplitude);
        gamma = Vec3(0.0, kPelvisHeight, 0.0);
      };
    case MotionKind::Composite:
      raise(ErrorCode::InvalidConfig, "composite handled separately");
  }
  (void)joints;
  raise(ErrorCode::InvalidConfig, "unknown motion kind");
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Evaluator the whole generator runs through; composites wrap part programs
// with gamma offsets and cross-blended poses.
struct MotionEvaluator {
  int joints;
  std::vector<ProgramFn> programs;
  std::vector<double> starts;   // segment start times
  std::vector<Vec3> offsets;    // gamma continuity shifts

  void eval(double t, Pose& pose, Vec3& gamma) const {
    std::size_t k = 0;
    while (k + 1 < starts.size() && t >= starts[k + 1]) ++k;
    eval_part(k, t, pose, gamma);
    // cross-blend window of kBlendWindow seconds centered on each boundary
    const double half = kBlendWindow / 2.0;
    if (k + 1 < programs.size() && t > starts[k + 1] - half) {
      const double alpha = smoothstep((t - (starts[k + 1] - half)) / kBlendWindow);
      Pose next_pose(joints);
      Vec3 next_gamma;
      eval_part(k + 1, t, next_pose, next_gamma);
      blend_into(pose, gamma, next_pose, next_gamma, alpha);
    } else if (k > 0 && t < starts[k] + half) {
      const double alpha = 1.0 - smoothstep((t - (starts[k] - half)) / kBlendWindow);
      Pose prev_pose(joints);
      Vec3 prev_gamma;
      eval_part(k - 1, t, prev_pose, prev_gamma);
      blend_into(pose, gamma, prev_pose, prev_gamma, alpha);
    }
  }

  void eval_part(std::size_t k, double t, Pose& pose, Vec3& gamma) const {
    pose = Pose(joints);
    programs[k](t - starts[k], pose, gamma);
    gamma += offsets[k];
  }

  static void blend_into(Pose& pose, Vec3& gamma, const Pose& other, const Vec3& other_gamma,
                         double alpha) {
    for (std::size_t j = 0; j < pose.theta.size(); ++j) {
      pose.theta[j] = blend_rot6d({1.0 - alpha, alpha}, {pose.theta[j], other.theta[j]});
    }
    gamma = (1.0 - alpha) * gamma + alpha * other_gamma;
  }
};

MotionEvaluator build_evaluator(const MotionSpec& spec, const Skeleton& skel) {
  MotionEvaluator ev;
  ev.joints = skel.joints();
  std::vector<MotionKind> kinds;
  if (spec.kind == MotionKind::Composite) {
    if (spec.parts.size() < 2) {
      raise(ErrorCode::InvalidConfig, "composite motions need at least 2 parts");
    }
    kinds = spec.parts;
  } else {
    kinds = {spec.kind};
  }
  const double part_duration = spec.duration / static_cast<double>(kinds.size());
  Vec3 carry = Vec3::Zero();
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const GaitParams p = draw_params(kinds[k], derive_seed(spec.seed, k));
    ev.programs.push_back(make_program(kinds[k], p, ev.joints));
    ev.starts.push_back(part_duration * static_cast<double>(k));
    if (k == 0) {
      ev.offsets.push_back(Vec3::Zero());
    } else {
      // connect gamma: previous segment's end position becomes this start
      Pose tmp(ev.joints);
      Vec3 prev_end, this_start;
      ev.programs[k - 1](part_duration, tmp, prev_end);
      prev_end += carry;
      ev.programs[k](0.0, tmp, this_start);
      ev.offsets.push_back(prev_end - this_start);
    }
    carry = ev.offsets.back();
  }
  return ev;
}

}  // namespace

const char* motion_kind_name(MotionKind kind) {
  switch (kind) {
    case MotionKind::WalkLine: return "walk_line";
    case MotionKind::WalkCircle: return "walk_circle";
    case MotionKind::RunArc: return "run_arc";
    case MotionKind::WaveArm: return "wave_arm";
    case MotionKind::Squat: return "squat";
    case MotionKind::Idle: return "idle";
    case MotionKind::Composite: return "composite";
  }
  return "unknown";
}

MotionKind motion_kind_from_name(const std::string& name) {
  for (MotionKind k : {MotionKind::WalkLine, MotionKind::WalkCircle, MotionKind::RunArc,
                       MotionKind::WaveArm, MotionKind::Squat, MotionKind::Idle,
                       MotionKind::Composite}) {
    if (name == motion_kind_name(k)) return k;
  }
  raise(ErrorCode::ParseError, "unknown motion kind: " + name);
}

GaitParams gait_params(const MotionSpec& spec) {
  return draw_params(spec.kind, derive_seed(spec.seed, 0));
}

FrameSequence generate_at(const MotionSpec& spec, const Skeleton& skel,
                          const std::vector<double>& timestamps) {
  if (spec.duration <= 0.0 || spec.fps <= 0.0) {
    raise(ErrorCode::InvalidConfig, "motion spec needs positive duration and fps");
  }
  const MotionEvaluator ev = build_evaluator(spec, skel);
  FrameSequence seq;
  seq.shape = spec.shape;
  seq.timestamps = timestamps;
  for (double t : timestamps) {
    Pose pose(ev.joints);
    Vec3 gamma;
    ev.eval(t, pose, gamma);
    seq.poses.push_back(std::move(pose));
    seq.displacements.push_back(gamma);
  }
  return seq;
}

FrameSequence generate(const MotionSpec& spec, const Skeleton& skel) {
  const int n = static_cast<int>(std::floor(spec.duration * spec.fps + 1e-9)) + 1;
  std::vector<double> ts(n);
  for (int i = 0; i < n; ++i) ts[i] = static_cast<double>(i) / spec.fps;
  return generate_at(spec, skel, ts);
}

void save_motion(const FrameSequence& seq, const std::string& path,
                 const std::string& skeleton_ref, const std::string& provenance) {
  seq.validate();
  nlohmann::json j;
  j["format_version"] = kMotionFormatVersion;
  j["skeleton_ref"] = skeleton_ref;
  j["beta"] = std::vector<double>(seq.shape.beta.data(), seq.shape.beta.data() + seq.shape.beta.size());
  if (!provenance.empty()) j["provenance"] = provenance;
  auto frames = nlohmann::json::array();
  for (int i = 0; i < seq.frames(); ++i) {
    nlohmann::json f;
    f["t"] = seq.timestamps[i];
    const Eigen::VectorXd theta = seq.poses[i].flat();
    f["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    f["gamma"] = {seq.displacements[i].x(), seq.displacements[i].y(), seq.displacements[i].z()};
    frames.push_back(std::move(f));
  }
  j["frames"] = std::move(frames);
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write motion file " + path);
  out << j.dump() << "\n";
}

FrameSequence load_motion(const std::string& path, const Skeleton& expected_skeleton) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open motion file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("motion json: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kMotionFormatVersion) {
    raise(ErrorCode::SchemaVersionMismatch, "unsupported motion format_version");
  }
  for (const char* field : {"skeleton_ref", "beta", "frames"}) {
    if (!j.contains(field)) raise(ErrorCode::ParseError, std::string("motion missing field ") + field);
  }
  FrameSequence seq;
  const auto beta = j["beta"].get<std::vector<double>>();
  seq.shape.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
  const int J = expected_skeleton.joints();
  for (const auto& f : j["frames"]) {
    for (const char* field : {"t", "theta", "gamma"}) {
      if (!f.contains(field)) {
        raise(ErrorCode::ParseError, std::string("motion frame missing field ") + field);
      }
    }
    seq.timestamps.push_back(f["t"].get<double>());
    const auto theta = f["theta"].get<std::vector<double>>();
    if (static_cast<int>(theta.size()) != 6 * J) {
      raise(ErrorCode::SchemaVersionMismatch,
            "motion joint count does not match the referenced skeleton");
    }
    seq.poses.push_back(Pose::from_flat(Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size())));
    const auto& g = f["gamma"];
    if (g.size() != 3) raise(ErrorCode::ParseError, "gamma must have 3 entries");
    seq.displacements.emplace_back(g[0].get<double>(), g[1].get<double>(), g[2].get<double>());
  }
  seq.validate();
  return seq;
}

SplitResult make_splits(const std::vector<MotionSpec>& specs, Rng& rng) {
  std::vector<MotionKind> kinds;
  std::vector<Eigen::VectorXd> shapes;
  auto shape_key = [](const Eigen::VectorXd& b) {
    std::string key;
    for (Eigen::Index i = 0; i < b.size(); ++i) key += std::to_string(b[i]) + ",";
    return key;
  };
  std::map<std::string, int> shape_index;
  std::map<int, bool> kind_seen;
  for (const auto& s : specs) {
    if (!kind_seen[static_cast<int>(s.kind)]) {
      kind_seen[static_cast<int>(s.kind)] = true;
      kinds.push_back(s.kind);
    }
    const std::string key = shape_key(s.shape.beta);
    if (!shape_index.count(key)) {
      shape_index[key] = static_cast<int>(shapes.size());
      shapes.push_back(s.shape.beta);
    }
  }
  if (kinds.size() < 2 || shapes.size() < 2) {
    raise(ErrorCode::InsufficientDiversity, "need at least 2 motion kinds and 2 body shapes");
  }
  SplitResult result;
  result.held_out_kind = kinds[rng.uniform_index(kinds.size())];
  const std::size_t n_held_shapes = shapes.size() > 2 ? 2 : 1;
  std::vector<std::size_t> order(shapes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  std::vector<std::string> held_keys;
  for (std::size_t i = 0; i < n_held_shapes; ++i) {
    result.held_out_shapes.push_back(shapes[order[i]]);
    held_keys.push_back(shape_key(shapes[order[i]]));
  }
  for (const auto& s : specs) {
    const bool held_kind = s.kind == result.held_out_kind;
    const bool held_shape =
        std::find(held_keys.begin(), held_keys.end(), shape_key(s.shape.beta)) != held_keys.end();
    if (held_kind || held_shape) {
      result.validation.push_back(s);
    } else {
      result.train.push_back(s);
    }
  }
  if (result.train.empty() || result.validation.empty()) {
    raise(ErrorCode::InsufficientDiversity, "split produced an empty partition");
  }
  return result;
}

std::vector<MotionSpec> load_motion_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open spec file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("spec json: ") + e.what());
  }
  if (!j.contains("specs")) raise(ErrorCode::ParseError, "spec file missing field specs");
  std::vector<MotionSpec> specs;
  for (const auto& js : j["specs"]) {
    MotionSpec s;
    s.kind = motion_kind_from_name(js.at("kind").get<std::string>());
    s.duration = js.value("duration", 4.0);
    s.fps = js.value("fps", 30.0);
    s.seed = js.value("seed", 0ULL);
    if (js.contains("beta")) {
      const auto b = js["beta"].get<std::vector<double>>();
      s.shape.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
    }
    if (js.contains("parts")) {
      for (const auto& part : js["parts"]) {
        s.parts.push_back(motion_kind_from_name(part.get<std::string>()));
      }
    }
    specs.push_back(std::move(s));
  }
  return specs;
}

void save_motion_specs(const std::vector<MotionSpec>& specs, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  auto arr = nlohmann::json::array();
  for (const auto& s : specs) {
    nlohmann::json js;
    js["kind"] = motion_kind_name(s.kind);
    js["duration"] = s.duration;
    js["fps"] = s.fps;
    js["seed"] = s.seed;
    js["beta"] = std::vector<double>(s.shape.beta.data(), s.shape.beta.data() + s.shape.beta.size());
    if (!s.parts.empty()) {
      auto parts = nlohmann::json::array();
      for (MotionKind k : s.parts) parts.push_back(motion_kind_name(k));
      js["parts"] = parts;
    }
    arr.push_back(std::move(js));
  }
  j["specs"] = std::move(arr);
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write spec file " + path);
  out << j.dump(1) << "\n";
}

}  // namespace lmp
