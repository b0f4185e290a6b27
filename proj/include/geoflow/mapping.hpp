#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoflow/kdtree.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/mlp.hpp"
#include "geoflow/param_store.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/surface_points.hpp"

namespace geoflow::mapping {

enum class PairTag : std::uint8_t { Initial = 0, Refinement = 1 };

struct Pair {
  Vec3 xs;                 // point on the proxy surface
  std::int32_t face = -1;  // proxy face the point was sampled from
  Vec3 xm;                 // paired avatar point
  PairTag tag = PairTag::Initial;
};

/// The transition set p = {(x_S, x_M)} for one frame: a probabilistic,
/// possibly many-to-one mapping between proxy and avatar surfaces.
struct PairedSet {
  std::string frame_id;
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
  /// Every x_S must lie on the proxy surface (plane residual <= tol).
  void validate_on_proxy(const TriMesh& proxy, double tol = 1e-6) const;
};

void save_pairs(const PairedSet& set, const std::filesystem::path& path);
PairedSet load_pairs(const std::filesystem::path& path);

struct DensityStats {
  std::vector<std::int64_t> per_face;  // pair count per proxy face
  double normalized_variance = 0;      // variance of count / area-expected count
  double uncovered_fraction = 0;       // positive-area faces with zero pairs
  std::int64_t total_pairs = 0;
};

/// Per-face pair counts with area-normalized variance. Pairs must carry face
/// indices.
DensityStats density_stats(const PairedSet& pairs, const TriMesh& proxy);

/// Baseline pairing: every avatar point matched to its geometrically nearest
/// proxy sample (the original nearest-neighbor construction this work
/// improves on).
PairedSet naive_knn_pairs(const SurfacePoints& avatar, const SurfacePoints& proxy_samples);

struct MapperConfig {
  std::size_t zm_width = 64;
  std::vector<std::size_t> hidden = {64, 64};
  Activation act = Activation::Silu;
  std::size_t pe_frequencies = 4;
  std::size_t steps = 3000;
  std::size_t batch_points = 4096;  // proxy and avatar points per Chamfer step
  double lr = 1e-3;
  double lr_latent = 1e-2;
  bool cosine_decay = true;
};

struct MapperFrameData {
  std::string frame_id;
  const TriMesh* proxy = nullptr;
  const std::vector<Vec3>* avatar_points = nullptr;
};

using ProgressFn = std::function<void(std::size_t step, double loss)>;

/// The supervised coarse mapper m(x_S | z_m): a shared residual MLP over
/// positionally encoded proxy points, with one auxiliary latent z_m per
/// frame, jointly trained to minimize the Chamfer distance between the image
/// of uniform proxy samples and the avatar samples.
class MapperModel {
 public:
  static MapperModel train(const std::vector<MapperFrameData>& frames, const MapperConfig& cfg,
                           RngStream& rng, const ProgressFn& progress = nullptr);

  /// Deterministic coarse predictions, one per input point, order preserved.
  /// Unknown frame ids are rejected.
  std::vector<Vec3> map_points(std::string_view frame_id, std::span<const Vec3> points) const;

  bool has_frame(std::string_view frame_id) const;
  const std::vector<std::string>& frame_ids() const { return frame_ids_; }
  const MapperConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& mutable_params() { return params_; }

  void save(const std::filesystem::path& checkpoint,
            const std::filesystem::path& meta) const;
  static MapperModel load(const std::filesystem::path& checkpoint,
                          const std::filesystem::path& meta);

  /// Chamfer training loss and gradient for one frame batch; used by the
  /// trainer and by gradient-correctness checks.
  double loss_grad(std::string_view frame_id, const std::vector<Vec3>& proxy_batch,
                   const std::vector<Vec3>& avatar_batch, ParamStore& grads) const;
  double loss(std::string_view frame_id, const std::vector<Vec3>& proxy_batch,
              const std::vector<Vec3>& avatar_batch) const;

  MapperModel() = default;  // unbound; fill via init()/train()/load()

 private:
  Tensor features(std::string_view frame_id, std::span<const Vec3> points) const;
  static std::string zm_name(std::string_view frame_id);

  MapperConfig cfg_;
  ParamStore params_;  // "m.*" network tensors plus "zm.<frame>" latents
  Mlp net_;
  std::vector<std::string> frame_ids_;
};

/// Appendix Step 2: pair every avatar point with the proxy sample whose
/// coarse prediction is nearest. coarse[i] must correspond to
/// proxy_samples[i].
PairedSet initial_transitions(const SurfacePoints& avatar, const SurfacePoints& proxy_samples,
                              const std::vector<Vec3>& coarse);

/// Appendix Step 3: for every positive-area proxy face without a pair, sample
/// `per_face_budget` new points, map them, and pair each with its nearest
/// avatar point. Returns the union; afterwards no positive-area face is
/// uncovered.
PairedSet coverage_refine(const PairedSet& pairs, const TriMesh& proxy, const MapperModel& mapper,
                          std::string_view frame_id, const SpatialIndex& avatar_index,
                          std::size_t per_face_budget, RngStream& rng);

struct FrameMapping {
  PairedSet pairs;
  std::size_t uncovered_before = 0;  // faces lacking pairs after Step 2
  DensityStats stats;                // after refinement
};

/// Steps 1-3 for one frame: coarse-map uniform proxy samples, build initial
/// transitions, refine coverage.
FrameMapping build_frame_mapping(const MapperModel& mapper, std::string_view frame_id,
                                 const TriMesh& proxy, const SurfacePoints& proxy_samples,
                                 const SurfacePoints& avatar, std::size_t per_face_budget,
                                 RngStream& rng);

}  // namespace geoflow::mapping
