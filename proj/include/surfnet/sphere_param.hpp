#pragma once

#include "surfnet/mesh.hpp"

#include <array>
#include <span>
#include <vector>

namespace surfnet {

/// Unit-sphere position per mesh vertex.
struct SphericalParam {
  std::vector<Vec3> positions;
  std::uint64_t mesh_fingerprint = 0;
};

struct ParamOptions {
  int max_iters = 500;
  /// Stop when an accepted step changes area distortion by less than this
  /// relative amount.
  double tol = 1e-7;
  /// Spherical umbrella-smoothing passes allowed to untangle the initial map.
  int repair_iters = 400;
};

struct ParamReport {
  double initial_distortion = 0.0;
  double final_distortion = 0.0;
  int iterations = 0;
  int accepted = 0;
  int repair_passes = 0;
  /// Distortion after initialization and after every accepted step.
  std::vector<double> history;
};

/// Normalized (vertex - surface centroid).
SphericalParam centroid_projection(const TriMesh& mesh);

/// Authalic (area-preserving) spherical parametrization of a genus-0 mesh.
///
/// Starts from the centroid projection and runs an area flow: each step
/// moves vertices tangentially along a diagonally preconditioned descent
/// direction of sum_f a_f log^2(ahat_f / a_f), reprojects onto the sphere,
/// and is rejected (step halved) if any spherical triangle flips or the
/// area distortion increases.
SphericalParam parametrize_authalic(const TriMesh& mesh, const ParamOptions& options = {},
                                    ParamReport* report = nullptr);

/// sum_f |a_f - ahat_f| over normalized mesh and chordal sphere face areas.
/// Zero iff perfectly authalic, never more than 2.
double area_distortion(const TriMesh& mesh, std::span<const Vec3> sphere);
inline double area_distortion(const TriMesh& mesh, const SphericalParam& param) {
  return area_distortion(mesh, param.positions);
}

/// Faces whose spherical image is inverted or degenerate.
int count_flipped(const TriMesh& mesh, std::span<const Vec3> sphere);

/// Signed spherical triangle area (positive when counterclockwise from outside).
double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

/// Sphere -> [0, 1]^2 via L1 normalization and folding the lower hemisphere
/// over the diamond edges. sign(0) is +1.
std::array<double, 2> octahedral_unfold(const Vec3& p);
/// Inverse of octahedral_unfold; returns a unit vector.
Vec3 octahedral_fold(double u, double v);

}  // namespace surfnet
