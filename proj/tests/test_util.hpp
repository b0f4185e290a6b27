#pragma once

#include <cmath>
#include <functional>

#include "geoflow/param_store.hpp"

namespace geoflow::testutil {

/// Central finite differences over every element of every tensor named in
/// `grads`, against the analytic values stored there. Returns the max
/// relative error. `loss_fn` must recompute the loss from current params.
inline double max_grad_rel_error(ParamStore& params, const ParamStore& grads,
                                 const std::function<double()>& loss_fn, double h = 1e-4) {
  double worst = 0;
  for (const auto& name : grads.names()) {
    Tensor& p = params.at(name);
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < p.v.size(); ++i) {
      const double keep = p.v[i];
      p.v[i] = keep + h;
      const double lp = loss_fn();
      p.v[i] = keep - h;
      const double lm = loss_fn();
      p.v[i] = keep;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = g.v[i];
      const double denom = std::max({1e-6, std::abs(fd), std::abs(an)});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace geoflow::testutil
