#include <doctest.h>

#include "surfnet/error.hpp"
#include "surfnet/geometry_image.hpp"
#include "surfnet/shapes.hpp"
#include "surfnet/spatial.hpp"
#include "surfnet/sphere_param.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>

using namespace surfnet;

namespace {

Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

// Best rotation R minimizing sum |R a_i - b_i|^2 (Kabsch).
Mat3 fit_rotation(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) h += b[i] * a[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 axis_angle(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(); }

}  // namespace

TEST_CASE("octahedral_unfold fixed points") {
  auto uv = octahedral_unfold(Vec3(0, 0, 1));
  CHECK(uv[0] == doctest::Approx(0.5));
  CHECK(uv[1] == doctest::Approx(0.5));
  uv = octahedral_unfold(Vec3(1, 0, 0));
  CHECK(uv[0] == doctest::Approx(1.0));
  CHECK(uv[1] == doctest::Approx(0.5));
  uv = octahedral_unfold(Vec3(0, 0, -1));
  CHECK(uv[0] == doctest::Approx(1.0));
  CHECK(uv[1] == doctest::Approx(1.0));
  for (double u : {0.0, 1.0})
    for (double v : {0.0, 1.0}) CHECK((octahedral_fold(u, v) - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("octahedral fold inverts unfold") {
  std::mt19937 rng(42);
  int tested = 0;
  for (int i = 0; i < 100000; ++i) {
    const Vec3 p = random_unit(rng);
    // Skip a thin band around the fold creases, where the inverse is two-valued.
    if (std::min({std::abs(p.x()), std::abs(p.y()), std::abs(p.z())}) < 1e-7) continue;
    const auto uv = octahedral_unfold(p);
    CHECK(uv[0] >= 0.0);
    CHECK(uv[0] <= 1.0);
    REQUIRE((octahedral_fold(uv[0], uv[1]) - p).norm() < 1e-9);
    ++tested;
  }
  CHECK(tested > 99000);
  // The square's side folds identify (u, 0) with (1 - u, 0).
  for (double u : {0.1, 0.3, 0.45}) {
    CHECK((octahedral_fold(u, 0.0) - octahedral_fold(1.0 - u, 0.0)).norm() < 1e-12);
    CHECK((octahedral_fold(0.0, u) - octahedral_fold(0.0, 1.0 - u)).norm() < 1e-12);
  }
}

TEST_CASE("area_distortion") {
  const TriMesh ico = shapes::icosphere(3);
  CHECK(area_distortion(ico, ico.vertices) < 1e-9);

  // Tetrahedron: pulling vertex 3 onto vertex 0 concentrates the spherical
  // area on the two faces that do not contain both; the distortion grows
  // monotonically toward 2 (1 - 2/4) = 1.
  const TriMesh tet = shapes::tetrahedron();
  std::vector<Vec3> base;
  for (const auto& v : tet.vertices) base.push_back(v.normalized());
  double prev = -1.0;
  for (double t : {0.0, 0.3, 0.6, 0.9, 0.99, 0.9999}) {
    auto s = base;
    s[3] = ((1.0 - t) * base[3] + t * base[0]).normalized();
    const double d = area_distortion(tet, s);
    CHECK(d > prev);
    CHECK(d <= 2.0);
    prev = d;
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-3));

  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> s;
    for (std::size_t i = 0; i < ico.vertices.size(); ++i) s.push_back(random_unit(rng));
    CHECK(area_distortion(ico, s) <= 2.0);
  }
}

TEST_CASE("parametrize_authalic on a sphere is the identity up to rotation") {
  const TriMesh ico = shapes::icosphere(3);
  ParamReport rep;
  const SphericalParam p = parametrize_authalic(ico, {}, &rep);
  CHECK(area_distortion(ico, p) < 1e-3);
  const Mat3 r = fit_rotation(ico.vertices, p.positions);
  double worst = 0.0;
  for (std::size_t i = 0; i < ico.vertices.size(); ++i) worst = std::max(worst, (r * ico.vertices[i] - p.positions[i]).norm());
  CHECK(worst < 1e-6);
  for (const auto& v : p.positions) CHECK(std::abs(v.norm() - 1.0) < 1e-9);
}

TEST_CASE("parametrize_authalic improves an elongated ellipsoid") {
  const TriMesh e = shapes::ellipsoid(3, 1, 1, 3);
  ParamReport rep;
  const SphericalParam p = parametrize_authalic(e, {500, 1e-7, 400}, &rep);
  const double init = area_distortion(e, centroid_projection(e));
  CHECK(rep.initial_distortion == doctest::Approx(init));
  CHECK(rep.final_distortion <= 0.5 * init);
  CHECK(count_flipped(e, p.positions) == 0);
  for (std::size_t i = 1; i < rep.history.size(); ++i) CHECK(rep.history[i] <= rep.history[i - 1]);
  for (const auto& v : p.positions) CHECK(std::abs(v.norm() - 1.0) < 1e-9);
}

TEST_CASE("parametrize_authalic never increases distortion on assorted meshes") {
  for (const TriMesh& m : {shapes::asymmetric_blob(3), shapes::box(1, 2, 0.5, 4),
                           shapes::superellipsoid({0.4, 0.6, 1.0, 1.5, 0.8}, 3)}) {
    ParamReport rep;
    const SphericalParam p = parametrize_authalic(m, {200, 1e-7, 400}, &rep);
    CHECK(area_distortion(m, p) <= area_distortion(m, centroid_projection(m)) + 1e-12);
    CHECK(count_flipped(m, p.positions) == 0);
  }
}

TEST_CASE("parametrize_authalic rejects higher genus") {
  try {
    parametrize_authalic(shapes::torus(12, 8, 2.0, 0.5));
    FAIL("expected genus error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Topology);
    CHECK(std::string(e.what()).find("genus") != std::string::npos);
  }
}

TEST_CASE("SphereLocator finds a containing face for every direction") {
  const TriMesh ico = shapes::icosphere(3);
  const SphereLocator loc(ico.vertices, ico.faces);
  std::mt19937 rng(9);
  for (int i = 0; i < 5000; ++i) {
    const Vec3 q = random_unit(rng);
    const auto hit = loc.locate(q);
    REQUIRE(hit.has_value());
    const auto& t = ico.faces[hit->face];
    double sum = 0.0;
    for (double w : hit->bary) {
      CHECK(w >= -1e-12);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // Interpolated chordal point lies on the ray through q.
    const Vec3 p = hit->bary[0] * ico.vertices[t[0]] + hit->bary[1] * ico.vertices[t[1]] + hit->bary[2] * ico.vertices[t[2]];
    CHECK((p.normalized() - q).norm() < 1e-9);
  }
  // A vertex direction hits weight 1 on that vertex.
  const auto hit = loc.locate(ico.vertices[7]);
  REQUIRE(hit);
  const auto& t = ico.faces[hit->face];
  for (int k = 0; k < 3; ++k)
    if (t[k] == 7) CHECK(hit->bary[k] == doctest::Approx(1.0));
}

TEST_CASE("ClosestPointTree matches brute force") {
  const TriMesh m = shapes::asymmetric_blob(2);
  const ClosestPointTree tree(m);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    double best = 1e300;
    for (const auto& f : m.faces)
      best = std::min(best, (closest_point_on_triangle(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]) - p).norm());
    const auto hit = tree.closest(p);
    CHECK(hit.distance == doctest::Approx(best).epsilon(1e-12));
    CHECK((hit.point - p).norm() == doctest::Approx(hit.distance));
  }
}

TEST_CASE("sample_geometry_image of an icosphere") {
  const TriMesh ico = shapes::icosphere(4);
  const SphericalParam p = parametrize_authalic(ico);
  auto fields = position_fields(ico);
  fields.push_back({"one", std::vector<double>(ico.vertices.size(), 3.5)});
  const GeometryImage gim = sample_geometry_image(ico, p, 64, fields);
  CHECK(gim.resolution == 64);
  CHECK(gim.channels() == 4);
  CHECK(gim.data.size() == 64u * 64u * 4u);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      CHECK(std::abs(Vec3(gim.at(r, c, 0), gim.at(r, c, 1), gim.at(r, c, 2)).norm() - 1.0) < 1e-2);
      CHECK(gim.at(r, c, 3) == doctest::Approx(3.5).epsilon(1e-12));
    }
  CHECK_THROWS_AS(sample_geometry_image(ico, p, 2, fields), Error);
  fields.push_back({"short", {1.0}});
  CHECK_THROWS_AS(sample_geometry_image(ico, p, 16, fields), Error);
}

TEST_CASE("geometry image boundary pixels agree across the fold") {
  const TriMesh m = shapes::asymmetric_blob(3);
  const SphericalParam p = parametrize_authalic(m, {100, 1e-7, 400});
  const int n = 32;
  const GeometryImage gim = sample_geometry_image(m, p, n, position_fields(m));
  // Pixel (0, k) and (0, n-1-k) straddle the same crease; their sphere
  // points are mirror images across it, one pixel pitch apart at most.
  double diag = 0.0;
  Vec3 lo, hi;
  bounding_box(m.vertices, lo, hi);
  diag = (hi - lo).norm();
  for (int k = 0; k < n; ++k) {
    const Vec3 a(gim.at(0, k, 0), gim.at(0, k, 1), gim.at(0, k, 2));
    const Vec3 b(gim.at(0, n - 1 - k, 0), gim.at(0, n - 1 - k, 1), gim.at(0, n - 1 - k, 2));
    CHECK((a - b).norm() < 0.1 * diag);
  }
}

TEST_CASE("decode_geometry_image") {
  SUBCASE("icosphere round trip") {
    const TriMesh ico = shapes::icosphere(4);
    const SphericalParam p = parametrize_authalic(ico);
    const GeometryImage gim = sample_geometry_image(ico, p, 64, position_fields(ico));
    const TriMesh dec = decode_geometry_image(gim);
    double mean = 0.0;
    for (const auto& v : dec.vertices) mean += std::abs(v.norm() - 1.0);
    mean /= dec.vertices.size();
    CHECK(mean < 1e-2);
    const auto info = euler_genus(dec);
    CHECK(info.genus == 0);
    CHECK(signed_volume(dec) > 0.0);
  }
  SUBCASE("4x4 identification count") {
    GeometryImage gim(4, {"x", "y", "z"});
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        gim.at(r, c, 0) = pixel_u(c, 4);
        gim.at(r, c, 1) = pixel_v(r, 4);
      }
    // Oracle: enumerate the identification classes directly.
    std::map<std::pair<int, int>, std::set<std::pair<int, int>>> cls;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) cls[{r, c}] = {{r, c}};
    auto join = [&](std::pair<int, int> a, std::pair<int, int> b) {
      auto merged = cls[a];
      merged.insert(cls[b].begin(), cls[b].end());
      for (const auto& m : merged) cls[m] = merged;
    };
    for (int k = 0; k < 4; ++k) {
      join({0, k}, {0, 3 - k});
      join({3, k}, {3, 3 - k});
      join({k, 0}, {3 - k, 0});
      join({k, 3}, {3 - k, 3});
    }
    std::set<std::set<std::pair<int, int>>> classes;
    for (const auto& [_, s] : cls) classes.insert(s);
    const TriMesh dec = decode_geometry_image(gim);
    CHECK(dec.vertex_count() == classes.size());
    CHECK(dec.vertex_count() < 16);
    CHECK(classes.size() == 9);  // 4 interior, 4 side pairs, 1 corner class
    CHECK(euler_genus(dec).genus == 0);
  }
  SUBCASE("odd resolution and missing channels are rejected") {
    CHECK_THROWS_AS(decode_geometry_image(GeometryImage(5, {"x", "y", "z"})), Error);
    CHECK_THROWS_AS(decode_geometry_image(GeometryImage(4, {"x", "y"})), Error);
  }
}

TEST_CASE("reconstruction_error") {
  const TriMesh ico = shapes::icosphere(4);
  const SphericalParam p = parametrize_authalic(ico);
  const GeometryImage gim = sample_geometry_image(ico, p, 64, position_fields(ico));
  // Cell diameter of the parametrization: longest sphere edge.
  double cell = 0.0;
  for (const auto& f : ico.faces)
    for (int k = 0; k < 3; ++k) cell = std::max(cell, (p.positions[f[k]] - p.positions[f[(k + 1) % 3]]).norm());
  CHECK(reconstruction_error(ico, gim) < 2.0 * cell);
  CHECK(reconstruction_error(ico, gim) < 1e-9);  // samples lie on the mesh itself

  const Vec3 t(40.0, -30.0, 0.0);
  TriMesh moved = ico;
  for (auto& v : moved.vertices) v += t;
  CHECK(reconstruction_error(moved, gim) == doctest::Approx(t.norm()).epsilon(0.03));

  const TriMesh cube = shapes::box(1, 1, 1, 6);
  CHECK(reconstruction_error(cube, gim) > 0.1);
}

TEST_CASE("geometry image refinement reduces decoding error") {
  const TriMesh blob = shapes::asymmetric_blob(4);
  const SphericalParam p = parametrize_authalic(blob, {150, 1e-7, 400});
  const ClosestPointTree tree(blob);
  auto decoded_error = [&](int n) {
    const TriMesh dec = decode_geometry_image(sample_geometry_image(blob, p, n, position_fields(blob)));
    // Mid-edge points of the decoded mesh measure how well it covers the surface.
    double sum = 0.0;
    for (const auto& f : dec.faces) sum += tree.closest((dec.vertices[f[0]] + dec.vertices[f[1]] + dec.vertices[f[2]]) / 3.0).distance;
    return sum / dec.faces.size();
  };
  const double e16 = decoded_error(16), e32 = decoded_error(32), e64 = decoded_error(64);
  CHECK(e32 <= e16);
  CHECK(e64 <= e32);
}

TEST_CASE("encoding is rotation equivariant") {
  const TriMesh m = shapes::asymmetric_blob(3);
  const SphericalParam p = parametrize_authalic(m, {50, 1e-7, 400});
  const Mat3 r = axis_angle(Vec3(1, 2, 3), 0.7);
  const TriMesh rotated = transformed(m, r, Vec3::Zero());
  const GeometryImage a = sample_geometry_image(m, p, 32, position_fields(m));
  const GeometryImage b = sample_geometry_image(rotated, p, 32, position_fields(rotated));
  const GeometryImage expect = rotate_positions(a, r);
  double worst = 0.0;
  for (std::size_t i = 0; i < b.data.size(); ++i) worst = std::max(worst, std::abs(b.data[i] - expect.data[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("GIM container round trip") {
  GeometryImage gim(8, {"x", "y", "z", "curvature"});
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : gim.data) v = static_cast<float>(u(rng));
  const auto path = std::filesystem::temp_directory_path() / "surfnet_test.gim";
  save_gim(gim, path);
  const GeometryImage back = load_gim(path);
  CHECK(back.resolution == 8);
  CHECK(back.channel_names == gim.channel_names);
  CHECK(back.data == gim.data);
  CHECK(std::filesystem::file_size(path) > 8u * 8u * 4u * 4u);
  std::filesystem::remove(path);
}

TEST_CASE("sample_bilinear reproduces pixel values at pixel centers") {
  GeometryImage gim(4, {"v"});
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) gim.at(r, c, 0) = r * 10 + c;
  CHECK(sample_bilinear(gim, pixel_u(2, 4), pixel_v(1, 4), 0) == doctest::Approx(12.0));
  CHECK(sample_bilinear(gim, 0.5, 0.5, 0) == doctest::Approx(16.5));
}
