#pragma once

#include "surfnet/mesh.hpp"

#include <functional>

namespace surfnet::shapes {

TriMesh tetrahedron();
TriMesh icosahedron();
/// Loop-style midpoint subdivision of the icosahedron, projected to radius r.
TriMesh icosphere(int subdivisions, double radius = 1.0);

/// Torus from a periodic n x m quad grid, each quad split into 2 triangles.
TriMesh torus(int n, int m, double major_radius, double minor_radius);

/// Axis-aligned box [-a, a] x [-b, b] x [-c, c], every face an n x n grid.
TriMesh box(double a, double b, double c, int n);

/// Superellipsoid parameters: exponents (eps1 along z, eps2 in xy) and
/// semi-axes.
struct SuperellipsoidParams {
  double eps1 = 1.0;
  double eps2 = 1.0;
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
};

/// Radial projection of an icosphere onto the superellipsoid surface
/// (|x/a|^(2/e2) + |y/b|^(2/e2))^(e2/e1) + |z/c|^(2/e1) = 1.
/// Genus 0 and shares connectivity with icosphere(subdivisions).
TriMesh superellipsoid(const SuperellipsoidParams& p, int subdivisions);

inline TriMesh ellipsoid(double a, double b, double c, int subdivisions) {
  return superellipsoid({1.0, 1.0, a, b, c}, subdivisions);
}

/// Icosphere with every vertex moved to radius(direction).
TriMesh radial(int subdivisions, const std::function<double(const Vec3&)>& radius);

/// Star-shaped blob without nontrivial rotational symmetry.
TriMesh asymmetric_blob(int subdivisions);

}  // namespace surfnet::shapes
