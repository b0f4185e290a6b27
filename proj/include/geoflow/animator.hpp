#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geoflow/flow.hpp"
#include "geoflow/param_store.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/synthdata.hpp"
#include "geoflow/tensor.hpp"

namespace geoflow::anim {

struct AnimConfig {
  std::size_t context = 2;  // past frames visible to the predictor
  double alpha = 1.0;       // contrastive loss weight
  double tau = 0.1;         // NT-Xent temperature
  double p_drop = 0.1;      // probability of nulling the past-latent context
  std::size_t id_width = 32;
  std::size_t latent_width = 96;
  std::vector<std::size_t> v_hidden = {128, 128};
  std::vector<std::size_t> w_hidden = {64};
  std::size_t t_frequencies = 6;
  std::size_t s_frequencies = 2;
  std::size_t steps = 6000;
  std::size_t batch_groups = 8;  // identities per step, two windows each
  double lr = 1e-3;
  bool cosine_decay = true;
  bool use_identity_condition = true;
  bool augment_conditioning = true;
};

/// One animation sequence from stage one: per-frame body parameters and
/// latents, tagged with identity and motion labels.
struct SequenceRecord {
  std::string sequence_id;
  std::string identity;
  std::string motion;
  std::vector<BodyParams> bodies;            // one per frame
  std::vector<std::vector<double>> latents;  // one per frame

  void validate(std::size_t context) const;  // N >= context+1, aligned sizes
};

/// A next-frame prediction window. Context slots are oldest-first; an empty
/// slot means "before the sequence start" and is filled with the learned null
/// embedding. ctx_sources carries the originating sequence per filled slot so
/// illegal cross-sequence windows can be rejected.
struct AnimWindow {
  std::string sequence_id;
  std::vector<std::vector<double>> ctx;  // context+1 slots; empty = null
  std::vector<std::string> ctx_sources;
  std::vector<BodyParams> bodies;  // context+2 poses (s-i .. s+1)
  std::vector<double> c;           // identity embedding; empty when unconditioned
  std::vector<double> z_next;
};

/// All legal training windows of one sequence (one per predictable frame).
std::vector<AnimWindow> build_training_windows(const SequenceRecord& seq, std::size_t context);

/// Normalized temperature-scaled cross entropy over unit embeddings.
/// `positives` are ordered (anchor, positive) pairs; the denominator runs
/// over every other embedding in the batch. Throws if an anchor has no
/// negative.
double ntxent_loss(const Tensor& embeddings, const std::vector<std::pair<int, int>>& positives,
                   double tau);
double ntxent_loss_grad(const Tensor& embeddings,
                        const std::vector<std::pair<int, int>>& positives, double tau,
                        Tensor& grad);

struct RolloutResult {
  std::vector<std::vector<double>> latents;  // [z0, generated...]
  std::size_t identity_encodings = 0;        // how often the id encoder ran
};

using ProgressFn = std::function<void(std::size_t step, double loss)>;

/// Autoregressive latent animation model: a conditional velocity field over
/// next-frame latents plus a contrastively trained identity encoder.
class AnimModel {
 public:
  static AnimModel init(const AnimConfig& cfg, RngStream& rng);

  void train(const std::vector<SequenceRecord>& sequences, RngStream& rng,
             const ProgressFn& progress = nullptr);

  /// Deterministic unit-norm identity embedding of a latent.
  std::vector<double> encode_identity(std::span<const double> z) const;

  /// Mean squared flow-matching residual of one window at (noise, t).
  double anim_loss(const AnimWindow& window, std::span<const double> noise, double t) const;

  /// anim part averaged over the windows plus alpha times the NT-Xent value
  /// over the windows' embeddings.
  double combined_loss(const std::vector<AnimWindow>& windows, const Tensor& noises,
                       std::span<const double> ts,
                       const std::vector<std::pair<int, int>>& positives) const;

  /// Generates `length` latents after z0. The identity condition is encoded
  /// exactly once, from z0; the first `context` predictions see null slots,
  /// as in training. track must hold length+1 per-frame bodies.
  RolloutResult rollout(const std::vector<BodyParams>& track, std::span<const double> z0,
                        std::size_t length, const SamplerConfig& sampler,
                        std::uint64_t seed) const;

  const AnimConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& mutable_params() { return params_; }

  void save(const std::filesystem::path& checkpoint, const std::filesystem::path& meta) const;
  static AnimModel load(const std::filesystem::path& checkpoint,
                        const std::filesystem::path& meta);

  /// Training loss over a prepared batch with gradient accumulation; exposed
  /// for gradient-correctness checks.
  double batch_loss_grad(const std::vector<AnimWindow>& windows, const Tensor& z_for_c,
                         const Tensor& noises, std::span<const double> ts,
                         const std::vector<std::pair<int, int>>& positives,
                         ParamStore& grads) const;
  double batch_loss(const std::vector<AnimWindow>& windows, const Tensor& z_for_c,
                    const Tensor& noises, std::span<const double> ts,
                    const std::vector<std::pair<int, int>>& positives) const;

  AnimModel() = default;  // unbound; fill via init()/train()/load()

 private:
  std::size_t cond_dim() const;
  std::size_t pe_s_dim() const;
  void write_cond_row(double* out, const AnimWindow& w) const;
  Tensor encode_raw(const Tensor& z_rows, Mlp::Cache* cache) const;

  AnimConfig cfg_;
  ParamStore params_;  // "v.*", "w.*", "null.z"
  MlpVelocityField field_;
  Mlp wnet_;
};

}  // namespace geoflow::anim
