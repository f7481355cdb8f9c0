#include <doctest.h>

#include "surfnet/error.hpp"
#include "surfnet/mesh.hpp"
#include "surfnet/shapes.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

using namespace surfnet;

namespace {

// Independent V - E + F count by enumeration.
int enumerate_chi(const TriMesh& m) {
  std::set<int> verts;
  std::set<std::pair<int, int>> edges;
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) {
      verts.insert(f[k]);
      edges.insert(std::minmax(f[k], f[(k + 1) % 3]));
    }
  return static_cast<int>(verts.size()) - static_cast<int>(edges.size()) + static_cast<int>(m.faces.size());
}

double radial_variance(const TriMesh& m) {
  double mean = 0.0;
  for (const auto& v : m.vertices) mean += v.norm();
  mean /= m.vertices.size();
  double var = 0.0;
  for (const auto& v : m.vertices) var += (v.norm() - mean) * (v.norm() - mean);
  return var / m.vertices.size();
}

}  // namespace

TEST_CASE("load_obj reads a hand-written tetrahedron") {
  const std::string text =
      "# tetra\n"
      "v 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\n"
      "f 1 2 3\nf 1 4 2\nf 1 3 4\nf 2 4 3\n";
  const TriMesh m = parse_obj(text);
  CHECK(m.vertex_count() == 4);
  CHECK(m.face_count() == 4);
  CHECK(m.faces[1] == Face{0, 3, 1});
}

TEST_CASE("load_obj fan-triangulates polygons and accepts slash indices") {
  const TriMesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n");
  REQUIRE(m.face_count() == 2);
  CHECK(m.faces[0] == Face{0, 1, 2});
  CHECK(m.faces[1] == Face{0, 2, 3});
}

TEST_CASE("load_obj reports out-of-range indices with the line number") {
  const std::string text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 9\n";
  try {
    parse_obj(text);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    CHECK(std::string(e.what()).find("vertex 9") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_obj("v 0 0 zero\n"), Error);
  CHECK_THROWS_AS(load_obj("/nonexistent/mesh.obj"), Error);
}

TEST_CASE("OBJ round trip is bit exact") {
  TriMesh m = shapes::icosphere(2, 1.0);
  std::mt19937 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : m.vertices) v += 1e-3 * Vec3(n(rng), n(rng), n(rng));
  const auto path = std::filesystem::temp_directory_path() / "surfnet_roundtrip.obj";
  save_obj(m, path);
  const TriMesh back = load_obj(path);
  REQUIRE(back.vertex_count() == m.vertex_count());
  CHECK(back.faces == m.faces);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK(back.vertices[i] == m.vertices[i]);
  std::filesystem::remove(path);

  // 9-significant-digit inputs re-print identically.
  const TriMesh nine = parse_obj("v 0.123456789 -1.23456789 98765.4321\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  CHECK(format_obj(parse_obj(format_obj(nine))) == format_obj(nine));
  CHECK(nine.vertices[0].x() == 0.123456789);
}

TEST_CASE("euler_genus on closed surfaces") {
  const auto ico = euler_genus(shapes::icosahedron());
  CHECK(ico.chi == 2);
  CHECK(ico.genus == 0);

  const TriMesh torus = shapes::torus(8, 8, 2.0, 0.5);
  CHECK(enumerate_chi(torus) == 0);  // V=64, E=192, F=128
  const auto t = euler_genus(torus);
  CHECK(t.chi == enumerate_chi(torus));
  CHECK(t.genus == 1);

  CHECK(euler_genus(shapes::icosphere(3)).genus == 0);
  CHECK(euler_genus(shapes::box(1, 2, 3, 4)).genus == 0);
  CHECK(signed_volume(shapes::icosahedron()) > 0.0);
  CHECK(signed_volume(shapes::box(1, 1, 1, 3)) == doctest::Approx(8.0));
  CHECK(signed_volume(shapes::torus(16, 16, 2.0, 0.5)) > 0.0);
}

TEST_CASE("euler_genus rejects disconnected and open meshes") {
  TriMesh two = shapes::tetrahedron();
  TriMesh other = shapes::tetrahedron();
  for (auto f : other.faces) {
    for (int& i : f) i += 4;
    two.faces.push_back(f);
  }
  for (auto v : other.vertices) two.vertices.push_back(v + Vec3(5, 0, 0));
  try {
    euler_genus(two);
    FAIL("expected disconnected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("disconnected") != std::string::npos);
  }

  TriMesh open = shapes::icosahedron();
  open.faces.pop_back();
  CHECK_THROWS_AS(euler_genus(open), Error);

  TriMesh bowtie = shapes::tetrahedron();
  bowtie.faces.push_back({0, 1, 2});
  CHECK_THROWS_AS(euler_genus(bowtie), Error);
}

TEST_CASE("euler_genus is invariant under vertex reordering") {
  const TriMesh m = shapes::torus(6, 10, 3.0, 1.0);
  std::vector<int> perm(m.vertices.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  TriMesh p;
  p.vertices.resize(m.vertices.size());
  for (std::size_t i = 0; i < perm.size(); ++i) p.vertices[perm[i]] = m.vertices[i];
  for (auto f : m.faces) p.faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});
  CHECK(euler_genus(p).chi == euler_genus(m).chi);
}

TEST_CASE("laplacian_smooth") {
  const TriMesh ico = shapes::icosphere(3);
  SUBCASE("zero iterations is the identity") {
    const TriMesh s = laplacian_smooth(ico, 0, 0.5);
    CHECK(s.vertices == ico.vertices);
    CHECK(s.faces == ico.faces);
  }
  SUBCASE("radial noise variance decreases") {
    TriMesh noisy = ico;
    std::mt19937 rng(11);
    std::normal_distribution<double> n(0.0, 0.05);
    for (auto& v : noisy.vertices) v *= 1.0 + n(rng);
    const TriMesh s = laplacian_smooth(noisy, 10, 0.5);
    CHECK(radial_variance(s) < radial_variance(noisy));
    CHECK(euler_genus(s).chi == euler_genus(noisy).chi);
    CHECK(s.faces == noisy.faces);
  }
  SUBCASE("regular tetrahedron shrinks about a fixed centroid") {
    const TriMesh t = shapes::tetrahedron();
    const TriMesh s = laplacian_smooth(t, 1, 0.5);
    Vec3 c0 = Vec3::Zero(), c1 = Vec3::Zero();
    for (int i = 0; i < 4; ++i) {
      c0 += t.vertices[i];
      c1 += s.vertices[i];
    }
    CHECK((c0 - c1).norm() < 1e-12);
    for (int i = 0; i < 4; ++i) CHECK(s.vertices[i].norm() == doctest::Approx(t.vertices[i].norm() / 3.0 * 1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(laplacian_smooth(ico, -1, 0.5), Error);
  CHECK_THROWS_AS(laplacian_smooth(ico, 1, 0.0), Error);
}

TEST_CASE("mean_curvature of spheres and planes") {
  const auto h1 = mean_curvature(shapes::icosphere(4, 1.0));
  for (double h : h1.values) CHECK(std::abs(h - 1.0) < 0.05);

  const auto h2 = mean_curvature(shapes::icosphere(4, 2.0));
  for (double h : h2.values) CHECK(std::abs(h - 0.5) < 0.025);

  // Interior of a large tessellated cube face is flat.
  const TriMesh cube = shapes::box(10, 10, 10, 10);
  const auto hc = mean_curvature(cube);
  int interior = 0;
  for (std::size_t i = 0; i < cube.vertices.size(); ++i) {
    const Vec3& v = cube.vertices[i];
    const int on_faces = (std::abs(std::abs(v.x()) - 10) < 1e-9) + (std::abs(std::abs(v.y()) - 10) < 1e-9) +
                         (std::abs(std::abs(v.z()) - 10) < 1e-9);
    if (on_faces == 1) {
      CHECK(hc.values[i] < 1e-6);
      ++interior;
    }
  }
  CHECK(interior > 0);
}

TEST_CASE("mean_curvature refines toward the analytic value") {
  double prev = 1e9;
  for (int s = 2; s <= 4; ++s) {
    const auto h = mean_curvature(shapes::icosphere(s));
    double worst = 0.0;
    for (double v : h.values) worst = std::max(worst, std::abs(v - 1.0));
    CHECK(worst < prev);
    prev = worst;
  }
}

TEST_CASE("mean_curvature scales as 1/s") {
  const TriMesh m = shapes::asymmetric_blob(3);
  const auto base = mean_curvature(m);
  for (double s : {0.5, 2.0}) {
    const auto h = mean_curvature(scaled(m, s));
    for (std::size_t i = 0; i < h.values.size(); ++i)
      CHECK(std::abs(h.values[i] * s - base.values[i]) <= 1e-9 * std::abs(base.values[i]) + 1e-12);
  }
}

TEST_CASE("mean_curvature rejects zero-area rings") {
  TriMesh m = shapes::tetrahedron();
  m.vertices.push_back(Vec3(9, 9, 9));
  try {
    mean_curvature(m);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("vertex 4") != std::string::npos);
  }
}
