#include "geoflow/surface_points.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geoflow/errors.hpp"

namespace geoflow {

namespace {

// Closest point parameters of p in the plane of triangle (a,b,c), then the
// residual out of plane. Used only for provenance validation.
double plane_residual(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 n = (b - a).cross(c - a);
  double n2 = n.norm2();
  if (n2 == 0) return (p - a).norm();
  return std::abs((p - a).dot(n)) / std::sqrt(n2);
}

}  // namespace

void SurfacePoints::validate_provenance(const TriMesh& mesh, double tol) const {
  if (source_face.empty()) return;
  if (source_face.size() != points.size())
    throw InvalidInput("SurfacePoints: face provenance size mismatch");
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::int32_t f = source_face[i];
    if (f < 0 || f >= static_cast<std::int32_t>(mesh.faces.size()))
      throw InvalidInput("SurfacePoints: face index out of range");
    const auto& tri = mesh.faces[f];
    double r = plane_residual(points[i], mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                              mesh.vertices[tri[2]]);
    if (r > tol) throw InvalidInput("SurfacePoints: point off its source face plane");
  }
}

Bounds3 SurfacePoints::bounds() const {
  Bounds3 b;
  if (points.empty()) return b;
  b.lo = b.hi = points[0];
  for (const Vec3& v : points) {
    b.lo.x = std::min(b.lo.x, v.x);
    b.lo.y = std::min(b.lo.y, v.y);
    b.lo.z = std::min(b.lo.z, v.z);
    b.hi.x = std::max(b.hi.x, v.x);
    b.hi.y = std::max(b.hi.y, v.y);
    b.hi.z = std::max(b.hi.z, v.z);
  }
  return b;
}

void save_ply(const SurfacePoints& pts, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_ply: cannot open " + path.string());
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << pts.points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "end_header\n";
  char buf[128];
  for (const Vec3& p : pts.points) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    out << buf;
  }
}

SurfacePoints load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_ply: cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "element") {
      std::string what;
      ss >> what >> count;
      if (what != "vertex") throw InvalidInput("load_ply: only vertex elements supported");
    } else if (tag == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw InvalidInput("load_ply: truncated header in " + path.string());
  SurfacePoints pts;
  pts.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    if (!(in >> p.x >> p.y >> p.z)) throw InvalidInput("load_ply: truncated data");
    pts.points.push_back(p);
  }
  return pts;
}

void save_xyz(const SurfacePoints& pts, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_xyz: cannot open " + path.string());
  char buf[128];
  for (const Vec3& p : pts.points) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    out << buf;
  }
}

SurfacePoints load_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_xyz: cannot open " + path.string());
  SurfacePoints pts;
  Vec3 p;
  while (in >> p.x >> p.y >> p.z) pts.points.push_back(p);
  return pts;
}

}  // namespace geoflow
