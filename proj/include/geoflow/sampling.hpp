#pragma once

#include <cstdint>
#include <span>

#include "geoflow/mesh.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/surface_points.hpp"

namespace geoflow {

/// Area-weighted uniform surface sampling. Faces are selected with probability
/// proportional to area (zero-area faces never), positions within a face use
/// the square-root barycentric trick. Deterministic for a given stream state.
SurfacePoints sample_surface(const TriMesh& mesh, std::size_t n, RngStream& rng);

inline SurfacePoints sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  return sample_surface(mesh, n, rng);
}

/// Uniform samples restricted to the given faces, `per_face` each. Used by
/// coverage refinement. Faces with zero area are skipped.
SurfacePoints sample_on_faces(const TriMesh& mesh, std::span<const std::int32_t> face_ids,
                              std::size_t per_face, RngStream& rng);

}  // namespace geoflow
