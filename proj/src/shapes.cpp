#include "surfnet/shapes.hpp"

#include "surfnet/error.hpp"

#include <cmath>
#include <map>

namespace surfnet::shapes {

TriMesh tetrahedron() {
  TriMesh m;
  m.vertices = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  m.faces = {Face{0, 1, 2}, Face{0, 3, 1}, Face{0, 2, 3}, Face{1, 3, 2}};
  return m;
}

TriMesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {Vec3(-1, t, 0), Vec3(1, t, 0),   Vec3(-1, -t, 0), Vec3(1, -t, 0),
                Vec3(0, -1, t), Vec3(0, 1, t),   Vec3(0, -1, -t), Vec3(0, 1, -t),
                Vec3(t, 0, -1), Vec3(t, 0, 1),   Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {Face{0, 11, 5}, Face{0, 5, 1},  Face{0, 1, 7},   Face{0, 7, 10}, Face{0, 10, 11},
             Face{1, 5, 9},  Face{5, 11, 4}, Face{11, 10, 2}, Face{10, 7, 6}, Face{7, 1, 8},
             Face{3, 9, 4},  Face{3, 4, 2},  Face{3, 2, 6},   Face{3, 6, 8},  Face{3, 8, 9},
             Face{4, 9, 5},  Face{2, 4, 11}, Face{6, 2, 10},  Face{8, 6, 7},  Face{9, 8, 1}};
  return m;
}

TriMesh icosphere(int subdivisions, double radius) {
  require(subdivisions >= 0, ErrorCode::InvalidArgument, "subdivisions must be >= 0");
  TriMesh m = icosahedron();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      int idx = static_cast<int>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Face> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces.swap(faces);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

TriMesh torus(int n, int m, double R, double r) {
  require(n >= 3 && m >= 3, ErrorCode::InvalidArgument, "torus grid needs n, m >= 3");
  TriMesh t;
  const double pi = std::acos(-1.0);
  for (int i = 0; i < n; ++i) {
    const double u = 2.0 * pi * i / n;
    for (int j = 0; j < m; ++j) {
      const double v = 2.0 * pi * j / m;
      t.vertices.emplace_back((R + r * std::cos(v)) * std::cos(u), (R + r * std::cos(v)) * std::sin(u), r * std::sin(v));
    }
  }
  auto id = [&](int i, int j) { return ((i + n) % n) * m + (j + m) % m; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      t.faces.push_back({a, b, c});
      t.faces.push_back({a, c, d});
    }
  return t;
}

TriMesh box(double a, double b, double c, int n) {
  require(n >= 1, ErrorCode::InvalidArgument, "box grid needs n >= 1");
  TriMesh m;
  std::map<std::array<int, 3>, int> index;
  // Lattice coordinates in [0, n]^3 so shared edges deduplicate exactly.
  auto vertex = [&](int i, int j, int k) {
    std::array<int, 3> key{i, j, k};
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(a * (2.0 * i / n - 1.0), b * (2.0 * j / n - 1.0), c * (2.0 * k / n - 1.0));
    index.emplace(key, id);
    return id;
  };
  // For each of the 6 faces: fixed axis, side, and two in-plane axes ordered
  // so (u x v) points outward.
  struct Side {
    int axis, value, u, v;
  };
  const Side sides[6] = {{0, n, 1, 2}, {0, 0, 2, 1}, {1, n, 2, 0}, {1, 0, 0, 2}, {2, n, 0, 1}, {2, 0, 1, 0}};
  for (const auto& s : sides) {
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        auto at = [&](int pp, int qq) {
          std::array<int, 3> c3{};
          c3[s.axis] = s.value;
          c3[s.u] = pp;
          c3[s.v] = qq;
          return vertex(c3[0], c3[1], c3[2]);
        };
        int v00 = at(p, q), v10 = at(p + 1, q), v11 = at(p + 1, q + 1), v01 = at(p, q + 1);
        m.faces.push_back({v00, v10, v11});
        m.faces.push_back({v00, v11, v01});
      }
  }
  return m;
}

namespace {

double spow(double x, double e) { return std::pow(std::abs(x), e); }

}  // namespace

TriMesh superellipsoid(const SuperellipsoidParams& p, int subdivisions) {
  require(p.eps1 > 0 && p.eps2 > 0 && p.a > 0 && p.b > 0 && p.c > 0, ErrorCode::InvalidArgument,
          "superellipsoid parameters must be positive");
  return radial(subdivisions, [&](const Vec3& d) {
    // Inside-outside function is homogeneous of degree 2/eps1.
    const double xy = spow(spow(d.x() / p.a, 2.0 / p.eps2) + spow(d.y() / p.b, 2.0 / p.eps2), p.eps2 / p.eps1);
    const double f = xy + spow(d.z() / p.c, 2.0 / p.eps1);
    return std::pow(f, -p.eps1 / 2.0);
  });
}

TriMesh radial(int subdivisions, const std::function<double(const Vec3&)>& radius) {
  TriMesh m = icosphere(subdivisions, 1.0);
  for (auto& v : m.vertices) v *= radius(v);
  return m;
}

TriMesh asymmetric_blob(int subdivisions) {
  return radial(subdivisions, [](const Vec3& d) {
    return 1.0 + 0.35 * d.x() + 0.25 * d.y() * d.y() + 0.15 * d.z() * d.x() + 0.1 * d.z();
  });
}

}  // namespace surfnet::shapes
