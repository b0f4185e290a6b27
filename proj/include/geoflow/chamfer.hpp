#pragma once

#include <span>
#include <vector>

#include "geoflow/vec3.hpp"

namespace geoflow {

/// Symmetric Chamfer distance with squared Euclidean terms and mean reduction
/// per direction:
///   CD(A,B) = mean_a min_b |a-b|^2 + mean_b min_a |b-a|^2.
/// Means keep values comparable across sample counts. Both sets must be
/// nonempty (InvalidInput otherwise).
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

struct ChamferGrad {
  double value = 0;
  std::vector<Vec3> grad_a;  // d CD / d a_i, nearest-neighbor matches held fixed
};

/// Chamfer plus its gradient with respect to the first set. Used to train the
/// coarse mapper, where A is the predicted point set.
ChamferGrad chamfer_with_grad(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace geoflow
