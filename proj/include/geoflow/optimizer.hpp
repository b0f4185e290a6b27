#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "geoflow/param_store.hpp"

namespace geoflow {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0;
};

/// Adaptive-moment optimizer with decoupled weight decay. Moments and step
/// counters are kept per tensor and only tensors present in the gradient
/// store are touched, so sparsely trained entries (per-frame latents) get
/// exact bias correction.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update for every tensor named in `grads`. Non-finite
  /// gradients abort with diagnostics (NumericFailure).
  void step(ParamStore& params, const ParamStore& grads);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  const AdamWConfig& config() const { return cfg_; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t steps_for(const std::string& name) const;

 private:
  struct Moments {
    Tensor m, v;
    std::int64_t t = 0;
  };
  AdamWConfig cfg_;
  std::unordered_map<std::string, Moments> moments_;
  std::int64_t global_step_ = 0;
};

/// Cosine decay from lr0 to lr0*floor_frac over total steps.
double cosine_lr(double lr0, std::int64_t step, std::int64_t total, double floor_frac = 0.05);

}  // namespace geoflow
