#include "geoflow/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geoflow/errors.hpp"

namespace geoflow {

void TriMesh::update_face_areas() {
  face_areas.resize(faces.size());
  total_area = 0;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Vec3& a = vertices[faces[f][0]];
    const Vec3& b = vertices[faces[f][1]];
    const Vec3& c = vertices[faces[f][2]];
    face_areas[f] = 0.5 * (b - a).cross(c - a).norm();
    total_area += face_areas[f];
  }
}

Vec3 TriMesh::face_normal(std::size_t f) const {
  const Vec3& a = vertices[faces[f][0]];
  const Vec3& b = vertices[faces[f][1]];
  const Vec3& c = vertices[faces[f][2]];
  return (b - a).cross(c - a).normalized();
}

Vec3 TriMesh::face_point(std::size_t f, double b0, double b1, double b2) const {
  const Vec3& a = vertices[faces[f][0]];
  const Vec3& b = vertices[faces[f][1]];
  const Vec3& c = vertices[faces[f][2]];
  return a * b0 + b * b1 + c * b2;
}

void TriMesh::validate() const {
  const auto n = static_cast<std::int32_t>(vertices.size());
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= n) throw InvalidInput("TriMesh: face index out of range");
    }
  }
  if (face_areas.size() != faces.size())
    throw InvalidInput("TriMesh: face area cache stale; call update_face_areas()");
  for (double a : face_areas) {
    if (!(a >= 0) || !std::isfinite(a)) throw InvalidInput("TriMesh: invalid face area");
  }
}

Bounds3 TriMesh::bounds() const {
  Bounds3 b;
  if (vertices.empty()) return b;
  b.lo = b.hi = vertices[0];
  for (const Vec3& v : vertices) {
    b.lo.x = std::min(b.lo.x, v.x);
    b.lo.y = std::min(b.lo.y, v.y);
    b.lo.z = std::min(b.lo.z, v.z);
    b.hi.x = std::max(b.hi.x, v.x);
    b.hi.y = std::max(b.hi.y, v.y);
    b.hi.z = std::max(b.hi.z, v.z);
  }
  return b;
}

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_obj: cannot open " + path.string());
  TriMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x >> v.y >> v.z;
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<std::int32_t, 3> f{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ss >> tok;
        // accept v, v/vt, v//vn forms; OBJ indices are 1-based
        f[k] = static_cast<std::int32_t>(std::strtol(tok.c_str(), nullptr, 10)) - 1;
      }
      mesh.faces.push_back(f);
    }
  }
  mesh.update_face_areas();
  mesh.validate();
  return mesh;
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_obj: cannot open " + path.string());
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

}  // namespace geoflow
