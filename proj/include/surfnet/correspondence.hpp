#pragma once

#include "surfnet/geometry_image.hpp"
#include "surfnet/mesh.hpp"
#include "surfnet/sphere_param.hpp"
#include "surfnet/spatial.hpp"

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace surfnet {

// ---- D2 shape distributions -------------------------------------------------

struct D2Descriptor {
  std::vector<double> histogram;
  /// Mean pairwise sample distance, divided out before binning.
  double normalization = 0.0;
};

struct D2Options {
  int samples = 1024;
  int bins = 64;
  /// Histogram covers [0, max_ratio] of the mean distance; larger ratios land
  /// in the last bin.
  double max_ratio = 3.0;
};

D2Descriptor d2_descriptor(const TriMesh& mesh, const D2Options& options, std::uint64_t seed);
/// Area-weighted uniform surface samples.
std::vector<Vec3> sample_surface(const TriMesh& mesh, int count, std::uint64_t seed);
double d2_distance(const D2Descriptor& a, const D2Descriptor& b);

/// S(i, j) = exp(-L1(i, j) / sigma), sigma = median off-diagonal distance.
Eigen::MatrixXd similarity_matrix(const std::vector<D2Descriptor>& descriptors);

// ---- clustering -------------------------------------------------------------

struct ClusterResult {
  std::vector<int> assignments;  ///< cluster id per shape, labels in order of first appearance
  std::vector<int> exemplars;    ///< shape index per cluster
  int base = -1;
  std::vector<int> auxiliaries;
};

/// Normalized-Laplacian embedding (K smallest eigenvectors, rows normalized)
/// followed by seeded k-means with 50 restarts.
ClusterResult spectral_cluster(const Eigen::MatrixXd& similarity, int k, std::uint64_t seed);

// ---- dense maps -------------------------------------------------------------

struct ParametrizedMesh {
  TriMesh mesh;
  SphericalParam param;
};

struct MapEntry {
  int face = -1;
  std::array<double, 3> bary{1.0, 0.0, 0.0};
};

/// Per source vertex, a barycentric location on the target mesh.
struct DenseCorrespondence {
  std::vector<MapEntry> entries;
  std::uint64_t source_fingerprint = 0;
  std::uint64_t target_fingerprint = 0;
};

struct RotationSearchOptions {
  int directions = 240;
  int in_plane = 8;
  int samples = 256;
  /// Resolution of the target position image used during the coarse search.
  int coarse_resolution = 64;
  /// The identity wins if its cost is within this relative margin of the best.
  double identity_margin = 1e-3;
  /// Relative cost band under which the pose-invariant cost cannot tell
  /// candidates apart; the search then minimizes the plain positional cost.
  double ambiguity_band = 1e-2;
  double refine_min_angle = 1e-6;
};

struct RotationSearchReport {
  Mat3 rotation = Mat3::Identity();
  double cost = 0.0;
  /// Every candidate scored the same: identity returned.
  bool degenerate = false;
  /// The plain positional cost decided the rotation.
  bool positional = false;
  int evaluations = 0;
};

/// Rotation R of the source sphere that best aligns the source surface with
/// the target surface (see RotationSearchOptions).
RotationSearchReport search_rotation(const ParametrizedMesh& source, const ParametrizedMesh& target,
                                     const RotationSearchOptions& options = {});

/// Each source vertex's sphere point, rotated by the best rotation, located
/// on the target's spherical triangulation.
DenseCorrespondence dense_map(const ParametrizedMesh& source, const ParametrizedMesh& target,
                              const RotationSearchOptions& options = {}, RotationSearchReport* report = nullptr);

/// Map that carries each source vertex to the target point under a fixed
/// sphere rotation.
DenseCorrespondence sphere_map(const ParametrizedMesh& source, const ParametrizedMesh& target, const Mat3& rotation);

/// Identity map of a mesh onto itself.
DenseCorrespondence identity_map(const ParametrizedMesh& mesh);

/// X -> A then A -> B. Points on A are pushed through by interpolating the
/// sphere images (on B's parametrization) of A's vertices and relocating.
DenseCorrespondence compose(const DenseCorrespondence& first, const DenseCorrespondence& second, const TriMesh& a,
                            const ParametrizedMesh& b);

/// Surface positions on `target` of every mapped source vertex.
std::vector<Vec3> mapped_positions(const DenseCorrespondence& map, const TriMesh& target);
/// Sphere points on the target's parametrization of every mapped vertex.
std::vector<Vec3> mapped_sphere_points(const DenseCorrespondence& map, const ParametrizedMesh& target);

/// Checks indices, barycentric sums and fingerprints against source/target.
void check_map(const DenseCorrespondence& map, const TriMesh& source, const TriMesh& target);

// ---- consistent geometry images ---------------------------------------------

/// M encoded on B's parametrization: each B vertex carries M's attributes at
/// its mapped point and B's pixel grid is sampled. `m_fields` default to M's
/// positions.
GeometryImage consistent_geometry_image(const TriMesh& m, const ParametrizedMesh& b, const DenseCorrespondence& b_to_m,
                                        int resolution, const std::vector<VertexField>& m_fields = {});

struct Selection {
  bool accepted = false;
  int chosen = -1;               ///< index into the candidate list
  std::vector<double> errors;    ///< reconstruction error per candidate
  GeometryImage gim;             ///< image of the chosen candidate
};

/// Picks the candidate B -> M map with the lowest reconstruction error of its
/// consistent image against M; rejects when that error exceeds threshold.
/// Errors below 1e-12 of M's bounding-box diagonal count as zero.
Selection select_map_and_filter(const TriMesh& m, const ParametrizedMesh& b,
                                const std::vector<DenseCorrespondence>& candidates, double threshold, int resolution);

/// Sum of squared differences between 4-neighbor pixels of the position
/// channels.
double grid_smoothness_energy(const GeometryImage& gim);

// ---- file format ------------------------------------------------------------

/// JSON array of {source_vertex, target_face, barycentric: [w0, w1, w2]}.
void save_correspondence(const DenseCorrespondence& map, const std::filesystem::path& path);
DenseCorrespondence load_correspondence(const std::filesystem::path& path);

}  // namespace surfnet
