#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geoflow/mesh.hpp"
#include "geoflow/vec3.hpp"

namespace geoflow {

/// A set of 3D sample points, optionally tagged with the mesh face each point
/// was drawn from. Carries both proxy-surface and avatar samples.
struct SurfacePoints {
  std::vector<Vec3> points;
  std::vector<std::int32_t> source_face;  // empty, or one entry per point
  std::string source_mesh_id;

  std::size_t size() const { return points.size(); }
  bool has_faces() const { return !source_face.empty(); }

  /// When face provenance is present, every point must lie in its face's
  /// plane within `tol` of its barycentric reconstruction.
  void validate_provenance(const TriMesh& mesh, double tol = 1e-6) const;

  Bounds3 bounds() const;
};

void save_ply(const SurfacePoints& pts, const std::filesystem::path& path);
SurfacePoints load_ply(const std::filesystem::path& path);
void save_xyz(const SurfacePoints& pts, const std::filesystem::path& path);
SurfacePoints load_xyz(const std::filesystem::path& path);

}  // namespace geoflow
