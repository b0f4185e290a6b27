#pragma once

#include <array>
#include <string>
#include <vector>

#include "geoflow/mesh.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/surface_points.hpp"

namespace geoflow {

/// Parameters of the synthetic proxy body. The template (all zeros) is the
/// standard body; shape and expression entries are interpolation offsets from
/// it, pose entries are joint angles in radians.
struct BodyParams {
  // scale, torso width, limb length, belly offset
  std::array<double, 4> shape{};
  // left shoulder, right shoulder, left hip, right hip, spine, neck
  std::array<double, 6> pose{};
  // head stretch, jaw push
  std::array<double, 2> expression{};

  void validate() const;  // angles within [-pi, pi], finite values

  /// Flat [shape | pose | expression] vector used as network conditioning.
  std::vector<double> conditioning() const;
  static constexpr std::size_t kConditioningDim = 12;
};

struct GarmentParams {
  double looseness = 0;          // outward shell offset, meters
  double wrinkle_frequency = 3;  // cycles per meter
  double wrinkle_amplitude = 0;  // meters
  double stiffness = 0;          // pose lag factor in [0, 1]

  void validate() const;
};

struct MotionTrack {
  std::vector<std::array<double, 6>> poses;
  double frame_rate = 30;

  void validate() const;  // length >= 2, finite
};

/// Deterministic capsule-assembly proxy mesh (torso, head, two arms, two
/// legs) posed by forward kinematics. Watertight per part, positive area.
TriMesh gen_proxy(const BodyParams& body);

/// Scalar summary of a pose driving garment detail phase.
double pose_phase(const std::array<double, 6>& pose);

/// Dense avatar samples: proxy surface displaced along face normals by a
/// looseness shell plus a sinusoidal wrinkle field whose phase follows
/// `phase`. The displacement magnitude never exceeds
/// looseness + 2 * wrinkle_amplitude.
SurfacePoints gen_avatar(const TriMesh& proxy, const GarmentParams& garment, double phase,
                         std::size_t n, RngStream& rng);

struct FramePair {
  TriMesh proxy;
  SurfacePoints avatar;
  BodyParams body;        // pose filled per frame
  double effective_phase = 0;
};

/// Per-frame (proxy, avatar) pairs. Garment detail follows the stiffness-
/// lagged pose phase: phase_s = (1-k) * phi(pose_s) + k * phi(pose_{s-1}),
/// so stiffness 1 reproduces the previous frame's detail exactly.
std::vector<FramePair> gen_sequence(const BodyParams& body, const GarmentParams& garment,
                                    const MotionTrack& motion, std::size_t samples_per_frame,
                                    const RngStream& rng);

/// Interpolation/extrapolation toward the zero template: shape and expression
/// are scaled by `factor`, pose is untouched. Valid factors lie strictly
/// inside (-1.0, 1.5).
BodyParams augment(const BodyParams& body, double factor);

/// Seeded uniform permutation of the batch.
void shuffle_augmented(std::vector<BodyParams>& batch, RngStream& rng);

/// Training-time conditioning augmentation: each element's shape/expression
/// is replaced by an augmented copy shuffled across the batch; poses stay.
std::vector<BodyParams> augmented_conditioning_batch(const std::vector<BodyParams>& batch,
                                                     RngStream& rng);

/// Deterministic identity tables for corpus generation.
BodyParams identity_body(std::size_t index, std::uint64_t corpus_seed);
GarmentParams identity_garment(std::size_t index);

/// Built-in parametric motions: "walk", "wave", "bend" (cycled by index).
MotionTrack make_motion(const std::string& kind, std::size_t frames, double frame_rate);
const std::vector<std::string>& motion_kinds();

}  // namespace geoflow
