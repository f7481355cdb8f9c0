#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace surfnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

/// Indexed triangle surface. Faces are counterclockwise seen from outside.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool empty() const { return faces.empty(); }
};

/// Per-vertex mean curvature magnitude, 1/model-unit.
struct CurvatureField {
  std::vector<double> values;
};

struct EulerInfo {
  int chi = 0;
  int genus = 0;
};

// ---- I/O ------------------------------------------------------------------

TriMesh load_obj(const std::filesystem::path& path);
TriMesh parse_obj(const std::string& text);
void save_obj(const TriMesh& mesh, const std::filesystem::path& path);
std::string format_obj(const TriMesh& mesh);
/// Points only (`v` records), used for decoded point clouds.
void save_obj_points(std::span<const Vec3> points, const std::filesystem::path& path);

// ---- topology -------------------------------------------------------------

/// Index range and degenerate-face checks. Throws Error(Topology).
void check_indices(const TriMesh& mesh);

/// Full validation: indices, edge-manifold with consistent orientation,
/// single face-connected component.
void validate(const TriMesh& mesh);

/// chi = V - E + F, genus = (2 - chi) / 2. Requires a closed, connected,
/// edge-manifold mesh.
EulerInfo euler_genus(const TriMesh& mesh);

/// Sorted, unique one-ring neighbor lists.
std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh);

/// Face ids incident to each vertex.
std::vector<std::vector<int>> vertex_faces(const TriMesh& mesh);

/// Number of face-connected components.
int face_components(const TriMesh& mesh, std::vector<int>* labels = nullptr);

/// Stable 64-bit content fingerprint of the connectivity and vertex count.
std::uint64_t topology_fingerprint(const TriMesh& mesh);

// ---- geometry -------------------------------------------------------------

double face_area(const TriMesh& mesh, int f);
Vec3 face_normal(const TriMesh& mesh, int f);
double surface_area(const TriMesh& mesh);
/// Signed enclosed volume (positive for outward-oriented closed meshes).
double signed_volume(const TriMesh& mesh);
/// Area-weighted surface centroid.
Vec3 surface_centroid(const TriMesh& mesh);
void bounding_box(std::span<const Vec3> points, Vec3& lo, Vec3& hi);

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation);
TriMesh scaled(const TriMesh& mesh, double s);

// ---- processing -----------------------------------------------------------

/// Uniform-weight (umbrella) smoothing: v += step * (mean(neighbors) - v).
TriMesh laplacian_smooth(const TriMesh& mesh, int iterations, double step);

/// Mean curvature from the cotangent Laplacian normalized by the mixed
/// Voronoi ring area: H(v) = |Lv| / 2.
CurvatureField mean_curvature(const TriMesh& mesh);

}  // namespace surfnet
