#include "geoflow/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "geoflow/errors.hpp"
#include "geoflow/sampling.hpp"

namespace geoflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Mat3 {
  // rotation about the x axis; the only joint motion the proxy uses
  static Mat3 rot_x(double a) {
    Mat3 m;
    m.c = std::cos(a);
    m.s = std::sin(a);
    return m;
  }
  double c = 1, s = 0;
  Vec3 apply(const Vec3& v) const { return {v.x, c * v.y - s * v.z, s * v.y + c * v.z}; }
};

Vec3 rotate_about(const Vec3& v, const Vec3& joint, const Mat3& r) {
  return joint + r.apply(v - joint);
}

// Appends a closed capsule (cylinder with hemispherical caps) along p0 -> p1.
void append_capsule(TriMesh& mesh, const Vec3& p0, const Vec3& p1, double radius,
                    std::size_t segments, std::size_t rings) {
  const Vec3 axis = p1 - p0;
  const double len = axis.norm();
  const Vec3 az = len > 0 ? axis / len : Vec3{0, 1, 0};
  // stable frame: pick the axis least aligned with az
  Vec3 ref = std::abs(az.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 0, 1};
  const Vec3 ax = az.cross(ref).normalized();
  const Vec3 ay = az.cross(ax);

  const std::int32_t base = static_cast<std::int32_t>(mesh.vertices.size());
  std::vector<std::int32_t> prev_ring;
  std::vector<std::int32_t> ring(segments);

  auto add_ring = [&](const Vec3& center, double r) {
    for (std::size_t s = 0; s < segments; ++s) {
      double a = 2.0 * kPi * static_cast<double>(s) / static_cast<double>(segments);
      mesh.vertices.push_back(center + r * (std::cos(a) * ax + std::sin(a) * ay));
      ring[s] = static_cast<std::int32_t>(mesh.vertices.size() - 1);
    }
  };
  auto connect = [&](const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
    for (std::size_t s = 0; s < segments; ++s) {
      std::size_t t = (s + 1) % segments;
      mesh.faces.push_back({a[s], a[t], b[s]});
      mesh.faces.push_back({b[s], a[t], b[t]});
    }
  };

  // bottom pole
  mesh.vertices.push_back(p0 - radius * az);
  const std::int32_t pole0 = base;

  // bottom hemisphere rings (from pole toward the cylinder)
  for (std::size_t q = 1; q <= rings; ++q) {
    double lat = 0.5 * kPi * static_cast<double>(q) / static_cast<double>(rings + 1);
    add_ring(p0 - radius * std::cos(lat) * az, radius * std::sin(lat));
    if (q == 1) {
      for (std::size_t s = 0; s < segments; ++s) {
        std::size_t t = (s + 1) % segments;
        mesh.faces.push_back({pole0, ring[t], ring[s]});
      }
    } else {
      connect(ring, prev_ring);
    }
    prev_ring = ring;
  }
  // cylinder rings
  add_ring(p0, radius);
  connect(prev_ring, ring);
  prev_ring = ring;
  add_ring(p1, radius);
  connect(prev_ring, ring);
  prev_ring = ring;
  // top hemisphere
  for (std::size_t q = rings; q >= 1; --q) {
    double lat = 0.5 * kPi * static_cast<double>(q) / static_cast<double>(rings + 1);
    add_ring(p1 + radius * std::cos(lat) * az, radius * std::sin(lat));
    connect(prev_ring, ring);
    prev_ring = ring;
  }
  mesh.vertices.push_back(p1 + radius * az);
  const std::int32_t pole1 = static_cast<std::int32_t>(mesh.vertices.size() - 1);
  for (std::size_t s = 0; s < segments; ++s) {
    std::size_t t = (s + 1) % segments;
    mesh.faces.push_back({prev_ring[s], prev_ring[t], pole1});
  }
}

// template skeleton (meters, y up)
constexpr double kHipY = 0.95;
constexpr double kShoulderY = 1.40;
constexpr double kNeckY = 1.50;
constexpr double kHeadY = 1.63;

struct PartRange {
  std::size_t vertex_begin = 0, vertex_end = 0;
};

}  // namespace

void BodyParams::validate() const {
  for (double a : pose) {
    if (!std::isfinite(a) || a < -kPi || a > kPi)
      throw InvalidInput("BodyParams: pose angle outside [-pi, pi]");
  }
  for (double s : shape) {
    if (!std::isfinite(s)) throw InvalidInput("BodyParams: non-finite shape");
  }
  for (double e : expression) {
    if (!std::isfinite(e)) throw InvalidInput("BodyParams: non-finite expression");
  }
}

std::vector<double> BodyParams::conditioning() const {
  std::vector<double> c;
  c.reserve(kConditioningDim);
  c.insert(c.end(), shape.begin(), shape.end());
  c.insert(c.end(), pose.begin(), pose.end());
  c.insert(c.end(), expression.begin(), expression.end());
  return c;
}

void GarmentParams::validate() const {
  if (looseness < 0 || wrinkle_amplitude < 0)
    throw InvalidInput("GarmentParams: amplitudes must be >= 0");
  if (stiffness < 0 || stiffness > 1) throw InvalidInput("GarmentParams: stiffness outside [0,1]");
}

void MotionTrack::validate() const {
  if (poses.size() < 2) throw InvalidInput("MotionTrack: needs at least 2 frames");
  for (const auto& p : poses) {
    for (double a : p) {
      if (!std::isfinite(a)) throw InvalidInput("MotionTrack: non-finite pose");
    }
  }
}

TriMesh gen_proxy(const BodyParams& body) {
  body.validate();
  const double torso_w = 1.0 + body.shape[1];
  const double limb_l = 1.0 + body.shape[2];
  const double belly = body.shape[3];

  TriMesh mesh;
  PartRange torso, head, arm_l, arm_r, leg_l, leg_r;

  const Vec3 hip_center{0, kHipY, 0};
  const Vec3 neck_joint{0, kNeckY, 0};
  const Vec3 shoulder_l{0.20, 1.38, 0}, shoulder_r{-0.20, 1.38, 0};
  const Vec3 hip_l{0.09, 0.92, 0}, hip_r{-0.09, 0.92, 0};

  // torso
  torso.vertex_begin = mesh.vertices.size();
  append_capsule(mesh, {0, kHipY, 0}, {0, kShoulderY, 0}, 0.14, 14, 3);
  torso.vertex_end = mesh.vertices.size();
  // head
  head.vertex_begin = mesh.vertices.size();
  append_capsule(mesh, {0, kHeadY - 0.02, 0}, {0, kHeadY + 0.02, 0}, 0.10, 12, 3);
  head.vertex_end = mesh.vertices.size();
  // arms
  arm_l.vertex_begin = mesh.vertices.size();
  append_capsule(mesh, shoulder_l, {0.235, 0.80, 0}, 0.045, 10, 2);
  arm_l.vertex_end = mesh.vertices.size();
  arm_r.vertex_begin = mesh.vertices.size();
  append_capsule(mesh, shoulder_r, {-0.235, 0.80, 0}, 0.045, 10, 2);
  arm_r.vertex_end = mesh.vertices.size();
  // legs
  leg_l.vertex_begin = mesh.vertices.size();
  append_capsule(mesh, hip_l, {0.10, 0.05, 0}, 0.055, 10, 2);
  leg_l.vertex_end = mesh.vertices.size();
  leg_r.vertex_begin = mesh.vertices.size();
  append_capsule(mesh, hip_r, {-0.10, 0.05, 0}, 0.055, 10, 2);
  leg_r.vertex_end = mesh.vertices.size();

  auto for_part = [&](const PartRange& r, auto&& fn) {
    for (std::size_t i = r.vertex_begin; i < r.vertex_end; ++i) fn(mesh.vertices[i]);
  };

  // shape: torso width scales the torso cross-section; belly pushes the
  // lower-front torso outward with a smooth falloff
  for_part(torso, [&](Vec3& v) {
    v.x *= torso_w;
    v.z *= torso_w;
    double dy = (v.y - 1.10) / 0.12;
    double w = std::exp(-0.5 * dy * dy);
    if (v.z > 0) v.z += belly * w * (v.z / 0.14);
  });
  // limb length scales limbs along their joint-to-tip axis
  auto stretch = [&](const PartRange& r, const Vec3& joint) {
    for_part(r, [&](Vec3& v) { v = joint + (v - joint) * limb_l; });
  };
  stretch(arm_l, shoulder_l);
  stretch(arm_r, shoulder_r);
  stretch(leg_l, hip_l);
  stretch(leg_r, hip_r);
  // expression: head stretch and jaw push
  const Vec3 head_center{0, kHeadY, 0};
  for_part(head, [&](Vec3& v) {
    v.y = head_center.y + (v.y - head_center.y) * (1.0 + 0.5 * body.expression[0]);
    if (v.y < head_center.y && v.z > 0.02) v.z += 0.05 * body.expression[1];
  });

  // pose: limbs about their joints, then spine carries torso, head and arms
  const Mat3 r_spine = Mat3::rot_x(body.pose[4]);
  const Mat3 r_neck = Mat3::rot_x(body.pose[5]);
  const Mat3 r_arm_l = Mat3::rot_x(body.pose[0]);
  const Mat3 r_arm_r = Mat3::rot_x(body.pose[1]);
  const Mat3 r_leg_l = Mat3::rot_x(body.pose[2]);
  const Mat3 r_leg_r = Mat3::rot_x(body.pose[3]);

  for_part(leg_l, [&](Vec3& v) { v = rotate_about(v, hip_l, r_leg_l); });
  for_part(leg_r, [&](Vec3& v) { v = rotate_about(v, hip_r, r_leg_r); });
  for_part(arm_l, [&](Vec3& v) { v = rotate_about(v, shoulder_l, r_arm_l); });
  for_part(arm_r, [&](Vec3& v) { v = rotate_about(v, shoulder_r, r_arm_r); });
  for_part(head, [&](Vec3& v) { v = rotate_about(v, neck_joint, r_neck); });
  for_part(torso, [&](Vec3& v) { v = rotate_about(v, hip_center, r_spine); });
  for_part(head, [&](Vec3& v) { v = rotate_about(v, hip_center, r_spine); });
  for_part(arm_l, [&](Vec3& v) { v = rotate_about(v, hip_center, r_spine); });
  for_part(arm_r, [&](Vec3& v) { v = rotate_about(v, hip_center, r_spine); });

  // global scale last, about the origin
  const double scale = 1.0 + body.shape[0];
  for (Vec3& v : mesh.vertices) v = v * scale;

  mesh.update_face_areas();
  return mesh;
}

double pose_phase(const std::array<double, 6>& pose) {
  constexpr std::array<double, 6> w = {1.0, -0.7, 0.9, -0.6, 1.3, 0.8};
  double p = 0;
  for (std::size_t i = 0; i < 6; ++i) p += w[i] * pose[i];
  return p;
}

SurfacePoints gen_avatar(const TriMesh& proxy, const GarmentParams& garment, double phase,
                         std::size_t n, RngStream& rng) {
  garment.validate();
  SurfacePoints samples = sample_surface(proxy, n, rng);
  const Vec3 dir1{0.35, 1.0, 0.55};
  const Vec3 dir2{0.9, 0.2, -0.4};
  const double two_pi_f = 2.0 * kPi * garment.wrinkle_frequency;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Vec3& p = samples.points[i];
    const Vec3 normal = proxy.face_normal(static_cast<std::size_t>(samples.source_face[i]));
    // hem weight: full effect below the hips, fading out above
    double hem = std::clamp((1.05 - p.y) / 0.30, 0.0, 1.0);
    double wrinkle = std::sin(two_pi_f * p.dot(dir1) + phase) +
                     hem * std::sin(0.5 * two_pi_f * p.dot(dir2) + phase);
    p += (garment.looseness + garment.wrinkle_amplitude * wrinkle) * normal;
  }
  samples.source_mesh_id = "avatar";
  return samples;
}

std::vector<FramePair> gen_sequence(const BodyParams& body, const GarmentParams& garment,
                                    const MotionTrack& motion, std::size_t samples_per_frame,
                                    const RngStream& rng) {
  motion.validate();
  garment.validate();
  std::vector<FramePair> frames;
  frames.reserve(motion.poses.size());
  double prev_phase = pose_phase(motion.poses[0]);
  for (std::size_t s = 0; s < motion.poses.size(); ++s) {
    FramePair fp;
    fp.body = body;
    fp.body.pose = motion.poses[s];
    double cur_phase = pose_phase(motion.poses[s]);
    fp.effective_phase = (1.0 - garment.stiffness) * cur_phase + garment.stiffness * prev_phase;
    prev_phase = cur_phase;
    fp.proxy = gen_proxy(fp.body);
    // One sampling stream, restarted per frame: a constant pose then yields
    // bitwise-identical frames, while posed frames still vary geometrically.
    RngStream frame_rng = rng.child("avatar");
    fp.avatar = gen_avatar(fp.proxy, garment, fp.effective_phase, samples_per_frame, frame_rng);
    frames.push_back(std::move(fp));
  }
  return frames;
}

BodyParams augment(const BodyParams& body, double factor) {
  if (!(factor > -1.0 && factor < 1.5))
    throw InvalidInput("augment: factor must lie in (-1.0, 1.5)");
  BodyParams out = body;
  for (double& s : out.shape) s *= factor;
  for (double& e : out.expression) e *= factor;
  return out;
}

void shuffle_augmented(std::vector<BodyParams>& batch, RngStream& rng) { rng.shuffle(batch); }

std::vector<BodyParams> augmented_conditioning_batch(const std::vector<BodyParams>& batch,
                                                     RngStream& rng) {
  std::vector<BodyParams> aug;
  aug.reserve(batch.size());
  for (const auto& b : batch) {
    double f;
    do {
      f = rng.uniform(-1.0, 1.5);
    } while (!(f > -1.0 && f < 1.5));
    aug.push_back(augment(b, f));
  }
  shuffle_augmented(aug, rng);
  for (std::size_t i = 0; i < aug.size(); ++i) aug[i].pose = batch[i].pose;
  return aug;
}

BodyParams identity_body(std::size_t index, std::uint64_t corpus_seed) {
  RngStream rng = RngStream(corpus_seed).child("identity", index);
  BodyParams b;
  b.shape[0] = rng.uniform(-0.12, 0.12);
  b.shape[1] = rng.uniform(-0.18, 0.18);
  b.shape[2] = rng.uniform(-0.12, 0.12);
  b.shape[3] = rng.uniform(0.0, 0.18);
  b.expression[0] = rng.uniform(-0.2, 0.2);
  b.expression[1] = rng.uniform(-0.2, 0.2);
  return b;
}

GarmentParams identity_garment(std::size_t index) {
  // spread from tight to very loose; indices beyond the table cycle
  constexpr std::array<double, 4> loose = {0.01, 0.04, 0.08, 0.12};
  constexpr std::array<double, 4> freq = {3.0, 4.0, 5.0, 6.0};
  constexpr std::array<double, 4> amp = {0.010, 0.018, 0.028, 0.035};
  constexpr std::array<double, 4> stiff = {0.10, 0.30, 0.55, 0.80};
  GarmentParams g;
  g.looseness = loose[index % 4];
  g.wrinkle_frequency = freq[(index / 4 + index) % 4];
  g.wrinkle_amplitude = amp[index % 4];
  g.stiffness = stiff[(index + index / 4) % 4];
  return g;
}

MotionTrack make_motion(const std::string& kind, std::size_t frames, double frame_rate) {
  if (frames < 2) throw InvalidInput("make_motion: needs at least 2 frames");
  MotionTrack m;
  m.frame_rate = frame_rate;
  m.poses.resize(frames);
  for (std::size_t s = 0; s < frames; ++s) {
    double tau = static_cast<double>(s) / frame_rate;  // seconds
    auto& p = m.poses[s];
    p = {0, 0, 0, 0, 0, 0};
    if (kind == "walk") {
      double c = std::sin(2.0 * kPi * 1.2 * tau);
      p[2] = 0.45 * c;
      p[3] = -0.45 * c;
      p[0] = -0.35 * c;
      p[1] = 0.35 * c;
      p[4] = 0.05 * std::sin(2.0 * kPi * 2.4 * tau);
    } else if (kind == "wave") {
      p[1] = -0.3 + 0.5 * std::sin(2.0 * kPi * 1.8 * tau);
      p[0] = 0.1 * std::sin(2.0 * kPi * 0.9 * tau);
      p[5] = 0.1 * std::sin(2.0 * kPi * 1.8 * tau);
    } else if (kind == "bend") {
      p[4] = 0.45 * std::sin(2.0 * kPi * 0.6 * tau);
      p[5] = 0.18 * std::sin(2.0 * kPi * 0.6 * tau + 0.5);
      p[0] = -0.15 * std::sin(2.0 * kPi * 0.6 * tau);
      p[1] = -0.15 * std::sin(2.0 * kPi * 0.6 * tau);
    } else {
      throw InvalidInput("make_motion: unknown kind " + kind);
    }
  }
  return m;
}

const std::vector<std::string>& motion_kinds() {
  static const std::vector<std::string> kinds = {"walk", "wave", "bend"};
  return kinds;
}

}  // namespace geoflow
