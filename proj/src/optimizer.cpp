#include "geoflow/optimizer.hpp"

#include <cmath>

#include "geoflow/errors.hpp"

namespace geoflow {

void AdamW::step(ParamStore& params, const ParamStore& grads) {
  ++global_step_;
  for (const auto& name : grads.names()) {
    const Tensor& g = grads.at(name);
    Tensor& p = params.at(name);
    if (!p.same_shape(g) && p.size() != g.size())
      throw InvalidInput("AdamW::step: gradient shape mismatch for " + name);
    if (!g.finite())
      throw NumericFailure("AdamW::step: non-finite gradient for " + name + " at step " +
                           std::to_string(global_step_));
    Moments& mo = moments_[name];
    if (mo.m.size() != p.size()) {
      mo.m = Tensor::zeros(p.shape);
      mo.v = Tensor::zeros(p.shape);
      mo.t = 0;
    }
    ++mo.t;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(mo.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(mo.t));
    for (std::size_t i = 0; i < p.v.size(); ++i) {
      double gi = g.v[i];
      double m = mo.m.v[i] = b1 * mo.m.v[i] + (1.0 - b1) * gi;
      double v = mo.v.v[i] = b2 * mo.v.v[i] + (1.0 - b2) * gi * gi;
      double mhat = m / bc1;
      double vhat = v / bc2;
      p.v[i] -= cfg_.lr * cfg_.weight_decay * p.v[i];
      p.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

std::int64_t AdamW::steps_for(const std::string& name) const {
  auto it = moments_.find(name);
  return it == moments_.end() ? 0 : it->second.t;
}

double cosine_lr(double lr0, std::int64_t step, std::int64_t total, double floor_frac) {
  if (total <= 0) return lr0;
  double s = std::min<double>(static_cast<double>(step), static_cast<double>(total));
  double c = 0.5 * (1.0 + std::cos(3.14159265358979323846 * s / static_cast<double>(total)));
  return lr0 * (floor_frac + (1.0 - floor_frac) * c);
}

}  // namespace geoflow
