#include "geoflow/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "geoflow/errors.hpp"

namespace geoflow {

namespace {

// sqrt trick: (b0, b1, b2) uniform over the triangle
void barycentric_uniform(RngStream& rng, double& b0, double& b1, double& b2) {
  double su = std::sqrt(rng.uniform());
  double v = rng.uniform();
  b0 = 1.0 - su;
  b1 = su * (1.0 - v);
  b2 = su * v;
}

}  // namespace

SurfacePoints sample_surface(const TriMesh& mesh, std::size_t n, RngStream& rng) {
  if (n < 1) throw InvalidInput("sample_surface: n must be >= 1");
  mesh.validate();
  if (!(mesh.total_area > 0)) throw InvalidInput("sample_surface: mesh has zero total area");

  // Cumulative areas; zero-area faces occupy empty intervals and are never hit.
  std::vector<double> cum(mesh.faces.size());
  double acc = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    acc += mesh.face_areas[f];
    cum[f] = acc;
  }

  SurfacePoints out;
  out.points.resize(n);
  out.source_face.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform() * acc;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    std::size_t f = it == cum.end() ? mesh.faces.size() - 1 : std::size_t(it - cum.begin());
    while (mesh.face_areas[f] == 0 && f > 0) --f;  // guard against landing on an empty interval edge
    double b0, b1, b2;
    barycentric_uniform(rng, b0, b1, b2);
    out.points[i] = mesh.face_point(f, b0, b1, b2);
    out.source_face[i] = static_cast<std::int32_t>(f);
  }
  return out;
}

SurfacePoints sample_on_faces(const TriMesh& mesh, std::span<const std::int32_t> face_ids,
                              std::size_t per_face, RngStream& rng) {
  mesh.validate();
  SurfacePoints out;
  out.points.reserve(face_ids.size() * per_face);
  out.source_face.reserve(face_ids.size() * per_face);
  for (std::int32_t f : face_ids) {
    if (f < 0 || f >= static_cast<std::int32_t>(mesh.faces.size()))
      throw InvalidInput("sample_on_faces: face index out of range");
    if (mesh.face_areas[f] == 0) continue;
    for (std::size_t i = 0; i < per_face; ++i) {
      double b0, b1, b2;
      barycentric_uniform(rng, b0, b1, b2);
      out.points.push_back(mesh.face_point(f, b0, b1, b2));
      out.source_face.push_back(f);
    }
  }
  return out;
}

}  // namespace geoflow
