#include "geoflow/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geoflow/errors.hpp"
#include "geoflow/parallel.hpp"

namespace geoflow {

namespace {

inline double coord(const Vec3& v, int axis) { return axis == 0 ? v.x : axis == 1 ? v.y : v.z; }

// Candidate ordering: distance first, index second. Lower wins, matching the
// brute-force convention, so results are bitwise reproducible.
struct Cand {
  double d2;
  std::int32_t idx;
  bool operator<(const Cand& o) const { return d2 < o.d2 || (d2 == o.d2 && idx < o.idx); }
};

}  // namespace

SpatialIndex::SpatialIndex(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  if (points_.empty()) throw InvalidInput("SpatialIndex: empty point set");
  order_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) order_[i] = static_cast<std::int32_t>(i);
  nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
  build(0, static_cast<std::int32_t>(points_.size()));
}

std::int32_t SpatialIndex::build(std::int32_t begin, std::int32_t end) {
  std::int32_t id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= static_cast<std::int32_t>(leaf_size_)) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::int32_t i = begin; i < end; ++i) {
    const Vec3& p = points_[order_[i]];
    lo.x = std::min(lo.x, p.x), hi.x = std::max(hi.x, p.x);
    lo.y = std::min(lo.y, p.y), hi.y = std::max(hi.y, p.y);
    lo.z = std::min(lo.z, p.z), hi.z = std::max(hi.z, p.z);
  }
  Vec3 ext = hi - lo;
  int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : ext.y >= ext.z ? 1 : 2;
  std::int32_t mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) {
                     return coord(points_[a], axis) < coord(points_[b], axis);
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = coord(points_[order_[mid]], axis);
  std::int32_t l = build(begin, mid);
  std::int32_t r = build(mid, end);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

template <typename Visitor>
void SpatialIndex::search(std::int32_t node, const Vec3& q, double& worst,
                          Visitor&& visit) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::int32_t i = n.begin; i < n.end; ++i) {
      std::int32_t p = order_[i];
      visit(Cand{dist2(q, points_[p]), p});
    }
    return;
  }
  double d = coord(q, n.axis) - n.split;
  std::int32_t near = d < 0 ? n.left : n.right;
  std::int32_t far = d < 0 ? n.right : n.left;
  search(near, q, worst, visit);
  // Equal plane distance may still hide an equal-distance, lower-index point.
  if (d * d <= worst) search(far, q, worst, visit);
}

void SpatialIndex::knn(const Vec3& query, std::size_t k, std::vector<std::int32_t>& idx,
                       std::vector<double>& dist) const {
  if (k == 0) {
    idx.clear();
    dist.clear();
    return;
  }
  if (k > points_.size()) throw InvalidInput("SpatialIndex::knn: k exceeds index size");
  std::vector<Cand> heap;  // max-heap, worst candidate on top
  heap.reserve(k);
  double worst = std::numeric_limits<double>::infinity();
  auto visit = [&](const Cand& c) {
    if (heap.size() < k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end());
      if (heap.size() == k) worst = heap.front().d2;
    } else if (c < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end());
      worst = heap.front().d2;
    }
  };
  search(0, query, worst, visit);
  std::sort_heap(heap.begin(), heap.end());
  idx.resize(k);
  dist.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    idx[i] = heap[i].idx;
    dist[i] = std::sqrt(heap[i].d2);
  }
}

std::pair<std::int32_t, double> SpatialIndex::nearest(const Vec3& query) const {
  Cand best{std::numeric_limits<double>::infinity(), -1};
  double worst = best.d2;
  auto visit = [&](const Cand& c) {
    if (c < best) {
      best = c;
      worst = best.d2;
    }
  };
  search(0, query, worst, visit);
  return {best.idx, best.d2};
}

KnnResult knn_query(const SpatialIndex& index, const SurfacePoints& queries, std::size_t k) {
  if (index.size() == 0) throw InvalidInput("knn_query: empty index");
  if (k > index.size()) throw InvalidInput("knn_query: k exceeds index size");
  KnnResult res;
  res.indices.resize(queries.size());
  res.distances.resize(queries.size());
  parallel_for(0, queries.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      index.knn(queries.points[i], k, res.indices[i], res.distances[i]);
    }
  });
  return res;
}

}  // namespace geoflow
