#pragma once

#include "surfnet/mesh.hpp"

#include <filesystem>
#include <vector>

namespace surfnet {

/// View rotation for azimuth (about z) then elevation (about x), degrees:
/// R = Rx(elevation) * Rz(azimuth). The camera looks along +y with z up.
Mat3 view_rotation(double azimuth_deg, double elevation_deg);

/// Row-major intensities in [0, 255]; 0 is background.
struct DepthImage {
  int resolution = 0;
  std::vector<double> intensity;
  double azimuth = 0.0;
  double elevation = 0.0;
  /// Camera-space depth of the nearest rendered point, and the depth that
  /// would map to intensity 1.
  double near_depth = 0.0;
  double far_depth = 0.0;

  double at(int r, int c) const { return intensity[static_cast<std::size_t>(r) * resolution + c]; }
};

/// Orthographic depth render. The mesh is centered on its surface centroid,
/// rotated by view_rotation, and projected onto the x-z plane; the image
/// spans 2.2 times the largest centroid distance. The nearest pixel gets
/// 255 and depth falls off linearly to 1 across the bounding-sphere
/// diameter. Throws Error(InvalidArgument) if nothing is rendered.
DepthImage render_depth(const TriMesh& mesh, double azimuth_deg, double elevation_deg, int resolution);

/// Binary PGM (P5, maxval 255); intensities are rounded.
void save_pgm(const DepthImage& image, const std::filesystem::path& path);
DepthImage load_pgm(const std::filesystem::path& path);

}  // namespace surfnet
