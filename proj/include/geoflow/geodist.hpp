#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geoflow/flow.hpp"
#include "geoflow/mapping.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/param_store.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/surface_points.hpp"
#include "geoflow/synthdata.hpp"

namespace geoflow::geodist {

struct GeoDistConfig {
  std::size_t latent_width = 96;
  double beta = 1e-6;  // L2-norm regularizer on the latent
  std::vector<std::size_t> hidden = {96, 96, 96};
  // garment wrinkles reach ~40 rad/m; six octaves keep them resolvable
  std::size_t x_frequencies = 6;
  std::size_t t_frequencies = 6;
  std::size_t s_frequencies = 2;  // body-parameter conditioning
  std::size_t steps = 12000;
  std::size_t batch = 384;
  std::size_t frames_per_batch = 4;
  double lr = 1e-3;
  double lr_latent = 1e-2;
  bool cosine_decay = true;
  bool augment_conditioning = true;
};

struct FrameInit {
  std::string frame_id;
  BodyParams body;
};

struct FrameTrainingData {
  std::string frame_id;
  BodyParams body;
  const mapping::PairedSet* pairs = nullptr;
};

/// One training batch drawn from a single frame's paired set.
struct TransitionBatch {
  std::string frame_id;
  Tensor xs, xm;          // [B,3] paired surface samples
  Tensor x0;              // [B,3] noise
  std::vector<double> t;  // [B]
};

using ProgressFn = std::function<void(std::size_t step, double loss)>;

/// Conditional velocity field u(x_t | t, x_S, S, z) over transitions
/// x_M - x_S, trained jointly with one learnable latent per frame. The
/// latents start as standard normal draws and are the only place frame
/// geometry beyond the body parameters can be stored.
class GeoDistModel {
 public:
  static GeoDistModel init(const std::vector<FrameInit>& frames, const GeoDistConfig& cfg,
                           RngStream& rng);

  void train(const std::vector<FrameTrainingData>& frames, RngStream& rng,
             const ProgressFn& progress = nullptr);

  /// Flow-matching loss on the batch plus beta * |z|_2 of the batch's frame.
  double loss(const TransitionBatch& batch) const;
  /// Same, accumulating parameter and latent gradients.
  double loss_grad(const TransitionBatch& batch, ParamStore& net_grads,
                   ParamStore& latent_grads) const;

  /// Samples n proxy points, draws noise, integrates the conditional field
  /// and returns x_S + transition per point. Pure in (params, proxy, body,
  /// z, n, cfg, seed).
  SurfacePoints reconstruct(const TriMesh& proxy, const BodyParams& body, const Tensor& z,
                            std::size_t n, const SamplerConfig& sampler,
                            std::uint64_t seed) const;

  const Tensor& latent(std::string_view frame_id) const;
  Tensor& latent(std::string_view frame_id);
  bool has_frame(std::string_view frame_id) const;
  const std::vector<std::string>& frame_ids() const { return frame_ids_; }
  const GeoDistConfig& config() const { return cfg_; }
  const BodyParams& frame_body(std::string_view frame_id) const;
  const ParamStore& net_params() const { return params_; }
  ParamStore& mutable_net_params() { return params_; }

  void save(const std::filesystem::path& checkpoint, const std::filesystem::path& latent_sidecar,
            const std::filesystem::path& meta) const;
  static GeoDistModel load(const std::filesystem::path& checkpoint,
                           const std::filesystem::path& latent_sidecar,
                           const std::filesystem::path& meta);

  GeoDistModel() = default;  // unbound; fill via init()/train()/load()

 private:
  Tensor conditioning(std::span<const Vec3> xs, const std::vector<double>& body_cond,
                      const Tensor& z) const;
  double loss_grad_impl(const TransitionBatch& batch, const std::vector<double>& body_cond,
                        ParamStore& net_grads, ParamStore& latent_grads) const;
  std::size_t cond_dim() const;

  GeoDistConfig cfg_;
  ParamStore params_;   // velocity network
  ParamStore latents_;  // one tensor per frame id (the sidecar table)
  MlpVelocityField field_;
  std::vector<std::string> frame_ids_;
  std::vector<BodyParams> frame_bodies_;
};

/// Table-1 "Supervised" baseline: the deterministic image of n uniform proxy
/// samples under the coarse mapper.
SurfacePoints supervised_reconstruct(const mapping::MapperModel& mapper,
                                     std::string_view frame_id, const TriMesh& proxy,
                                     std::size_t n, std::uint64_t seed);

}  // namespace geoflow::geodist
