#include "geoflow/chamfer.hpp"

#include <vector>

#include "geoflow/errors.hpp"
#include "geoflow/kdtree.hpp"
#include "geoflow/parallel.hpp"

namespace geoflow {

namespace {

constexpr std::size_t kChunk = 2048;

// Sum of squared nearest-neighbor distances from each point of `from` into
// `index`, accumulated per fixed-size chunk then reduced in chunk order, so
// the value does not depend on the worker count.
double sum_nn_sq(std::span<const Vec3> from, const SpatialIndex& index,
                 std::vector<std::int32_t>* matches = nullptr) {
  const std::size_t chunks = (from.size() + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
  if (matches) matches->resize(from.size());
  parallel_for(
      0, from.size(),
      [&](std::size_t lo, std::size_t hi) {
        double acc = 0;
        for (std::size_t i = lo; i < hi; ++i) {
          auto [idx, d2] = index.nearest(from[i]);
          acc += d2;
          if (matches) (*matches)[i] = idx;
        }
        partial[lo / kChunk] += acc;
      },
      kChunk);
  double total = 0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InvalidInput("chamfer: point sets must be nonempty");
  SpatialIndex ia(std::vector<Vec3>(a.begin(), a.end()));
  SpatialIndex ib(std::vector<Vec3>(b.begin(), b.end()));
  double ab = sum_nn_sq(a, ib) / static_cast<double>(a.size());
  double ba = sum_nn_sq(b, ia) / static_cast<double>(b.size());
  return ab + ba;
}

ChamferGrad chamfer_with_grad(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InvalidInput("chamfer: point sets must be nonempty");
  SpatialIndex ia(std::vector<Vec3>(a.begin(), a.end()));
  SpatialIndex ib(std::vector<Vec3>(b.begin(), b.end()));

  ChamferGrad out;
  out.grad_a.assign(a.size(), Vec3{});

  std::vector<std::int32_t> a_to_b;
  double ab = sum_nn_sq(a, ib, &a_to_b) / static_cast<double>(a.size());
  const double wa = 2.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.grad_a[i] += wa * (a[i] - b[a_to_b[i]]);
  }

  std::vector<std::int32_t> b_to_a;
  double ba = sum_nn_sq(b, ia, &b_to_a) / static_cast<double>(b.size());
  const double wb = 2.0 / static_cast<double>(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    out.grad_a[b_to_a[j]] += wb * (a[b_to_a[j]] - b[j]);
  }

  out.value = ab + ba;
  return out;
}

}  // namespace geoflow
