#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "geoflow/chamfer.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/kdtree.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/sampling.hpp"
#include "geoflow/surface_points.hpp"

using namespace geoflow;

namespace {

TriMesh make_mesh(std::vector<Vec3> verts, std::vector<std::array<std::int32_t, 3>> faces) {
  TriMesh m;
  m.vertices = std::move(verts);
  m.faces = std::move(faces);
  m.update_face_areas();
  return m;
}

// brute-force k-NN with the same tie rule: (distance, index) ascending
void brute_knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k,
               std::vector<std::int32_t>& idx, std::vector<double>& dist) {
  std::vector<std::pair<double, std::int32_t>> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({dist2(q, pts[i]), (std::int32_t)i});
  std::sort(all.begin(), all.end());
  idx.resize(k);
  dist.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    idx[i] = all[i].second;
    dist[i] = std::sqrt(all[i].first);
  }
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("sample_surface: single right triangle, barycentric validity") {
  TriMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  SurfacePoints pts = sample_surface(m, 3, std::uint64_t{0});
  REQUIRE(pts.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(pts.source_face[i] == 0);
    // on this triangle barycentrics are (1-x-y, x, y)
    double b1 = pts.points[i].x, b2 = pts.points[i].y, b0 = 1.0 - b1 - b2;
    CHECK(b0 >= -1e-12);
    CHECK(b1 >= -1e-12);
    CHECK(b2 >= -1e-12);
    CHECK(b0 + b1 + b2 == doctest::Approx(1.0).epsilon(1e-12));
  }
  pts.validate_provenance(m, 1e-6);
}

TEST_CASE("sample_surface: area-proportional face selection") {
  // face 0 area 1, face 1 area 3
  TriMesh m = make_mesh({{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, -3, 0}},
                        {{0, 1, 2}, {0, 3, 1}});
  REQUIRE(m.face_areas[0] == doctest::Approx(1.0));
  REQUIRE(m.face_areas[1] == doctest::Approx(3.0));
  SurfacePoints pts = sample_surface(m, 40000, std::uint64_t{7});
  std::size_t on_face0 = 0;
  for (auto f : pts.source_face) on_face0 += f == 0;
  CHECK(on_face0 >= 9400);  // binomial(40000, 1/4), 5 sigma
  CHECK(on_face0 <= 10600);
}

TEST_CASE("sample_surface: zero-area faces are never selected") {
  TriMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}},
                        {{0, 1, 2}, {0, 1, 3}});  // second face is degenerate
  REQUIRE(m.face_areas[1] == 0.0);
  SurfacePoints pts = sample_surface(m, 5000, std::uint64_t{3});
  for (auto f : pts.source_face) CHECK(f == 0);
}

TEST_CASE("sample_surface: zero-area mesh rejected") {
  TriMesh m = make_mesh({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}});
  CHECK_THROWS_AS(sample_surface(m, 10, std::uint64_t{0}), InvalidInput);
}

TEST_CASE("sample_surface: empirical frequencies match area fractions (chi-square)") {
  RngStream meshes(99);
  TriMesh m;
  // fan of 10 triangles with random heights -> unequal areas
  m.vertices.push_back({0, 0, 0});
  for (int i = 0; i <= 10; ++i)
    m.vertices.push_back({1.0 + 0.1 * i, 0, meshes.uniform(0.2, 2.0)});
  for (int i = 0; i < 10; ++i)
    m.faces.push_back({0, std::int32_t(i + 1), std::int32_t(i + 2)});
  m.update_face_areas();

  const std::size_t n = 100000;
  SurfacePoints pts = sample_surface(m, n, std::uint64_t{11});
  std::vector<double> counts(10, 0);
  for (auto f : pts.source_face) counts[f] += 1;
  double chi2 = 0;
  for (int f = 0; f < 10; ++f) {
    double expected = n * m.face_areas[f] / m.total_area;
    chi2 += (counts[f] - expected) * (counts[f] - expected) / expected;
  }
  CHECK(chi2 < 27.877);  // 99.9th percentile of chi-square with 9 dof
}

TEST_CASE("knn: singleton, ordering, identity") {
  SpatialIndex idx1(std::vector<Vec3>{{0, 0, 0}});
  std::vector<std::int32_t> ids;
  std::vector<double> ds;
  idx1.knn({1, 0, 0}, 1, ids, ds);
  CHECK(ids[0] == 0);
  CHECK(ds[0] == doctest::Approx(1.0));

  SpatialIndex idx2(std::vector<Vec3>{{0, 0, 0}, {2, 0, 0}});
  idx2.knn({0.9, 0, 0}, 2, ids, ds);
  CHECK(ids == std::vector<std::int32_t>{0, 1});
  CHECK(ds[0] == doctest::Approx(0.9));
  CHECK(ds[1] == doctest::Approx(1.1));

  idx2.knn({2, 0, 0}, 1, ids, ds);
  CHECK(ids[0] == 1);
  CHECK(ds[0] == 0.0);
}

TEST_CASE("knn: rejects empty index and oversize k") {
  CHECK_THROWS_AS(SpatialIndex(std::vector<Vec3>{}), InvalidInput);
  SpatialIndex idx(std::vector<Vec3>{{0, 0, 0}});
  SurfacePoints q;
  q.points = {{1, 1, 1}};
  CHECK_THROWS_AS(knn_query(idx, q, 2), InvalidInput);
}

TEST_CASE("knn: agrees exactly with brute force on random sets") {
  RngStream rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    std::size_t n = 1 + rng.integer(500);
    std::size_t mq = 1 + rng.integer(100);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (n > 4 && trial % 3 == 0) pts[n - 1] = pts[0];  // exercise duplicate-point ties
    SpatialIndex index(pts);
    std::size_t k = 1 + rng.integer(std::min<std::size_t>(n, 8));
    for (std::size_t j = 0; j < mq; ++j) {
      Vec3 q{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
      std::vector<std::int32_t> ti, bi;
      std::vector<double> td, bd;
      index.knn(q, k, ti, td);
      brute_knn(pts, q, k, bi, bd);
      REQUIRE(ti == bi);
      for (std::size_t r = 0; r < k; ++r) REQUIRE(td[r] == bd[r]);
    }
  }
}

TEST_CASE("chamfer: hand values and identity") {
  std::vector<Vec3> a = {{0, 0, 0}};
  std::vector<Vec3> b = {{1, 0, 0}, {3, 0, 0}};
  // 1 + (1 + 9)/2 = 6
  CHECK(chamfer(a, b) == doctest::Approx(6.0).epsilon(1e-12));

  RngStream rng(2);
  std::vector<Vec3> s(64);
  for (auto& p : s) p = {rng.normal(), rng.normal(), rng.normal()};
  CHECK(chamfer(s, s) == 0.0);
  CHECK(chamfer(s, b) == doctest::Approx(chamfer(b, s)).epsilon(1e-12));
}

TEST_CASE("chamfer: rejects empty inputs") {
  std::vector<Vec3> a = {{0, 0, 0}}, empty;
  CHECK_THROWS_AS(chamfer(a, empty), InvalidInput);
  CHECK_THROWS_AS(chamfer(empty, a), InvalidInput);
}

TEST_CASE("chamfer: invariant under rigid transforms of both sets") {
  RngStream rng(17);
  std::vector<Vec3> a(80), b(60);
  for (auto& p : a) p = {rng.normal(), rng.normal(), rng.normal()};
  for (auto& p : b) p = {rng.normal() + 0.5, rng.normal(), rng.normal()};
  double base = chamfer(a, b);

  // rotation about z by 0.7 rad plus translation
  auto rigid = [](const Vec3& p) {
    double c = std::cos(0.7), s = std::sin(0.7);
    return Vec3{c * p.x - s * p.y + 2.0, s * p.x + c * p.y - 1.0, p.z + 0.25};
  };
  std::vector<Vec3> ar(a.size()), br(b.size());
  std::transform(a.begin(), a.end(), ar.begin(), rigid);
  std::transform(b.begin(), b.end(), br.begin(), rigid);
  CHECK(chamfer(ar, br) == doctest::Approx(base).epsilon(1e-9));

  // pure translation leaves the value unchanged as well
  std::transform(a.begin(), a.end(), ar.begin(), [](const Vec3& p) {
    return p + Vec3{0.3, -0.8, 1.1};
  });
  std::transform(b.begin(), b.end(), br.begin(), [](const Vec3& p) {
    return p + Vec3{0.3, -0.8, 1.1};
  });
  CHECK(chamfer(ar, br) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("point cloud and mesh file round trips") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "geoflow_geom_io";
  fs::create_directories(dir);

  RngStream rng(8);
  SurfacePoints pts;
  for (int i = 0; i < 50; ++i) pts.points.push_back({rng.normal(), rng.normal(), rng.normal()});

  save_ply(pts, dir / "p.ply");
  SurfacePoints ply = load_ply(dir / "p.ply");
  REQUIRE(ply.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK((ply.points[i] - pts.points[i]).norm() < 1e-7);

  save_xyz(pts, dir / "p.xyz");
  SurfacePoints xyz = load_xyz(dir / "p.xyz");
  REQUIRE(xyz.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK((xyz.points[i] - pts.points[i]).norm() < 1e-7);

  TriMesh m = make_mesh({{0, 0, 0}, {1.25, 0, 0}, {0, 1, 0.5}}, {{0, 1, 2}});
  save_obj(m, dir / "m.obj");
  TriMesh m2 = load_obj(dir / "m.obj");
  REQUIRE(m2.faces.size() == 1);
  REQUIRE(m2.vertices.size() == 3);
  CHECK((m2.vertices[1] - m.vertices[1]).norm() < 1e-7);
  CHECK(m2.faces[0] == m.faces[0]);

  fs::remove_all(dir);
}

}  // TEST_SUITE
