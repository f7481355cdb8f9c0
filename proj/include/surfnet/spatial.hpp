#pragma once

#include "surfnet/mesh.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace surfnet {

/// Closest point on triangle (a, b, c) to p, with its barycentric weights.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               std::array<double, 3>* bary = nullptr);

struct SurfacePoint {
  int face = -1;
  std::array<double, 3> bary{1.0, 0.0, 0.0};
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
};

/// Bounding-volume hierarchy over the faces of a mesh for closest-point
/// queries. Holds a reference to the mesh; the mesh must outlive the tree.
class ClosestPointTree {
public:
  explicit ClosestPointTree(const TriMesh& mesh);

  SurfacePoint closest(const Vec3& p) const;

private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // children, or -1 for a leaf
    int begin = 0, end = 0;     // face range for leaves
  };
  int build(int begin, int end);
  static double box_distance2(const Node& n, const Vec3& p);

  const TriMesh* mesh_;
  std::vector<int> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

/// Point location on a spherical triangulation (unit-sphere vertex positions,
/// outward-oriented faces). Uses a bucket grid over the cube [-1, 1]^3.
class SphereLocator {
public:
  SphereLocator(std::span<const Vec3> positions, std::span<const Face> faces);

  struct Hit {
    int face = -1;
    /// Gnomonic barycentrics: weights of the ray/chordal-plane intersection.
    std::array<double, 3> bary{1.0, 0.0, 0.0};
  };

  /// Containing face of direction q (need not be normalized). Ties go to the
  /// smallest face index. Returns nullopt if no face contains q.
  std::optional<Hit> locate(const Vec3& q) const;

private:
  bool contains(int f, const Vec3& q, double tol) const;
  Hit barycentric(int f, const Vec3& q) const;
  std::size_t bucket(const Vec3& p) const;

  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  int res_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace surfnet
