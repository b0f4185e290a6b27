#pragma once

#include <span>
#include <string>

#include "geoflow/mlp.hpp"
#include "geoflow/param_store.hpp"
#include "geoflow/tensor.hpp"

namespace geoflow {

/// One training batch for the flow-matching objective: source samples x0,
/// target samples x1, per-sample times in [0,1] and an opaque conditioning
/// block (zero columns when unconditional).
struct FlowBatch {
  Tensor x0, x1;          // [B, D]
  std::vector<double> t;  // [B]
  Tensor cond;            // [B, C], C may be 0

  void validate() const;
};

struct SamplerConfig {
  enum class Scheme { Euler, Heun };
  std::size_t steps = 20;
  Scheme scheme = Scheme::Euler;

  void validate() const;  // steps >= 1
};

SamplerConfig::Scheme scheme_from_name(std::string_view name);

/// x_t = (1-t) x0 + t x1, rowwise. Rejects t outside [0,1].
Tensor interpolate(const Tensor& x0, const Tensor& x1, std::span<const double> t);

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t cond_dim() const = 0;
  /// x [B,D], t [B], cond [B,C] -> velocity [B,D]
  virtual Tensor velocity(const Tensor& x, std::span<const double> t,
                          const Tensor& cond) const = 0;
};

/// Mean over the batch of the squared residual norm
/// |u(x_t | t, cond) - (x1 - x0)|^2 (summed over dimensions).
double fm_loss(const VelocityField& field, const FlowBatch& batch);

/// Fixed-step integration of dx/dt = u(x, t) from t=0 to t=1. Throws
/// NumericFailure with step diagnostics if the state leaves the finite range.
Tensor integrate(const VelocityField& field, Tensor x0, const Tensor& cond,
                 const SamplerConfig& cfg);

/// Velocity field backed by an MLP over [posenc(x) | posenc(t) | cond].
/// The conditioning block is passed through raw; gradients with respect to it
/// are exposed so trainable conditioning (per-frame latents) can be learned.
class MlpVelocityField : public VelocityField {
 public:
  struct Options {
    std::size_t state_dim = 3;
    std::size_t cond_dim = 0;
    std::size_t x_frequencies = 4;
    std::size_t t_frequencies = 6;
    std::vector<std::size_t> hidden = {96, 96, 96};
    Activation act = Activation::Silu;
    bool zero_init_output = true;
  };

  /// Registers network parameters under `prefix` in `store`. The store must
  /// outlive the field.
  MlpVelocityField(ParamStore& store, std::string prefix, const Options& opt, RngStream& init);
  /// Binds to existing parameters.
  static MlpVelocityField attached(const ParamStore& store, std::string prefix,
                                   const Options& opt);

  std::size_t state_dim() const override { return opt_.state_dim; }
  std::size_t cond_dim() const override { return opt_.cond_dim; }
  Tensor velocity(const Tensor& x, std::span<const double> t, const Tensor& cond) const override;

  /// Flow-matching loss plus gradient accumulation. Returns the loss value;
  /// parameter gradients go to `grads`, conditioning gradients (if requested)
  /// to `dcond` as a [B,C] tensor.
  double fm_loss_grad(const FlowBatch& batch, ParamStore& grads, Tensor* dcond) const;

  const Options& options() const { return opt_; }
  const Mlp& net() const { return net_; }

  MlpVelocityField() = default;  // unbound; assign before use

 private:
  Tensor features(const Tensor& x, std::span<const double> t, const Tensor& cond) const;

  const ParamStore* store_ = nullptr;
  Options opt_;
  Mlp net_;
};

}  // namespace geoflow
