#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geoflow/vec3.hpp"

namespace geoflow {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> faces;

  // Cache maintained by update_face_areas(); required before sampling.
  std::vector<double> face_areas;
  double total_area = 0;

  void update_face_areas();

  Vec3 face_normal(std::size_t f) const;  // unit normal, zero vector for degenerate faces
  Vec3 face_point(std::size_t f, double b0, double b1, double b2) const;

  /// Checks index ranges and the area cache; throws InvalidInput on violation.
  void validate() const;

  Bounds3 bounds() const;
};

TriMesh load_obj(const std::filesystem::path& path);  // v/f records only
void save_obj(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace geoflow
