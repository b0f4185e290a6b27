#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "geoflow/surface_points.hpp"
#include "geoflow/vec3.hpp"

namespace geoflow {

/// Exact nearest-neighbor kd-tree over a fixed point set. Ties on distance
/// resolve toward the lower point index, matching brute force, so queries are
/// reproducible across runs and thread counts. Construction is single-writer;
/// queries are const and safe to run in parallel.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<Vec3> points, std::size_t leaf_size = 16);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  /// k nearest neighbors, distances (Euclidean) ascending. k must be <= size().
  void knn(const Vec3& query, std::size_t k, std::vector<std::int32_t>& idx,
           std::vector<double>& dist) const;

  /// Index and squared distance of the single nearest point.
  std::pair<std::int32_t, double> nearest(const Vec3& query) const;

 private:
  struct Node {
    double split = 0;
    std::int32_t axis = -1;  // -1 marks a leaf
    std::int32_t left = -1, right = -1;
    std::int32_t begin = 0, end = 0;  // leaf range into order_
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);
  template <typename Visitor>
  void search(std::int32_t node, const Vec3& q, double& worst, Visitor&& visit) const;

  std::vector<Vec3> points_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

struct KnnResult {
  std::vector<std::vector<std::int32_t>> indices;  // one row per query
  std::vector<std::vector<double>> distances;      // ascending per row
};

/// Exact k-NN for a batch of queries, parallel across the batch.
/// Throws InvalidInput on an empty index or k > index size.
KnnResult knn_query(const SpatialIndex& index, const SurfacePoints& queries, std::size_t k);

}  // namespace geoflow
