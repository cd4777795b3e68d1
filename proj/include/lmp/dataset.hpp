#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmp/motion.hpp"
#include "lmp/rng.hpp"

namespace lmp {

enum class MotionKind { WalkLine, WalkCircle, RunArc, WaveArm, Squat, Idle, Composite };

const char* motion_kind_name(MotionKind kind);
MotionKind motion_kind_from_name(const std::string& name);

// Procedural motion request. Programs are deterministic in the seed; gait
// parameters (speed, stride frequency, amplitudes) are drawn once per spec.
struct MotionSpec {
  MotionKind kind = MotionKind::Idle;
  double duration = 4.0;  // seconds
  double fps = 30.0;
  BodyShape shape;
  std::uint64_t seed = 0;
  std::vector<MotionKind> parts;  // Composite only, >= 2 entries
};

// Drawn program parameters, exposed so tests can check e.g. travel distance
// against the drawn speed.
struct GaitParams {
  double speed = 0.0;       // m/s along the facing axis (walk/run kinds)
  double frequency = 1.0;   // stride or wave cycles per second
  double amplitude = 0.5;   // main joint swing, radians
  double turn_rate = 0.0;   // yaw rad/s (circle/arc kinds)
};

GaitParams gait_params(const MotionSpec& spec);

FrameSequence generate(const MotionSpec& spec, const Skeleton& skel);

// Same programs evaluated at caller-chosen timestamps inside [0, duration];
// the synthetic ground truth is continuous in time.
FrameSequence generate_at(const MotionSpec& spec, const Skeleton& skel,
                          const std::vector<double>& timestamps);

// Motion file format: JSON with skeleton_ref, beta, frames [{t, theta, gamma}].
void save_motion(const FrameSequence& seq, const std::string& path,
                 const std::string& skeleton_ref, const std::string& provenance = "");
FrameSequence load_motion(const std::string& path, const Skeleton& expected_skeleton);

struct SplitResult {
  std::vector<MotionSpec> train;
  std::vector<MotionSpec> validation;
  MotionKind held_out_kind;
  std::vector<Eigen::VectorXd> held_out_shapes;
};

// Holds out one motion kind and two body shapes entirely; validation is
// everything containing either.
SplitResult make_splits(const std::vector<MotionSpec>& specs, Rng& rng);

// Spec-list file used by the CLI `synth` subcommand.
std::vector<MotionSpec> load_motion_specs(const std::string& path);
void save_motion_specs(const std::vector<MotionSpec>& specs, const std::string& path);

}  // namespace lmp
