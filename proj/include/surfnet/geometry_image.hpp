#pragma once

#include "surfnet/mesh.hpp"
#include "surfnet/sphere_param.hpp"
#include "surfnet/spatial.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace surfnet {

/// N x N x C grid, row-major (row, column, channel). Pixel (r, c) samples
/// the octahedral square at u = (c + 0.5) / N, v = (r + 0.5) / N.
struct GeometryImage {
  int resolution = 0;
  std::vector<std::string> channel_names;
  std::vector<double> data;

  GeometryImage() = default;
  GeometryImage(int n, std::vector<std::string> names)
      : resolution(n), channel_names(std::move(names)),
        data(static_cast<std::size_t>(n) * n * channel_names.size(), 0.0) {}

  int channels() const { return static_cast<int>(channel_names.size()); }
  std::size_t pixels() const { return static_cast<std::size_t>(resolution) * resolution; }
  double& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * resolution + c) * channels() + ch]; }
  double at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * resolution + c) * channels() + ch]; }
  /// Index of a named channel, or -1.
  int channel(const std::string& name) const;
  /// Single channel as a contiguous N*N array.
  std::vector<double> plane(int ch) const;
  void set_plane(int ch, const std::vector<double>& values);
};

/// A per-vertex scalar attribute to rasterize.
struct VertexField {
  std::string name;
  std::vector<double> values;
};

std::vector<VertexField> position_fields(const TriMesh& mesh);

inline double pixel_u(int c, int n) { return (c + 0.5) / n; }
inline double pixel_v(int r, int n) { return (r + 0.5) / n; }

/// For every pixel: fold (u, v) back to the sphere, locate the containing
/// spherical triangle of the parametrization, interpolate the fields.
GeometryImage sample_geometry_image(const TriMesh& mesh, const SphericalParam& param, int resolution,
                                    const std::vector<VertexField>& fields);

/// Same, reusing a prebuilt locator over the parametrization.
GeometryImage sample_geometry_image(const TriMesh& mesh, const SphereLocator& locator, int resolution,
                                    const std::vector<VertexField>& fields);

/// (x, y, z) channel indices; throws if any is missing.
std::array<int, 3> position_channels(const GeometryImage& gim);

/// Pixel positions of the x, y, z channels, row-major.
std::vector<Vec3> decoded_points(const GeometryImage& gim);

/// Regular-grid mesh with boundary pixels merged along the octahedral
/// identification; the result is a closed genus-0 surface.
TriMesh decode_geometry_image(const GeometryImage& gim);

/// Mean over decoded pixel points of the distance to the mesh surface.
double reconstruction_error(const TriMesh& mesh, const GeometryImage& gim);
double reconstruction_error(const ClosestPointTree& tree, const GeometryImage& gim);

/// Bilinear lookup on the pixel-center lattice (clamped at the border).
double sample_bilinear(const GeometryImage& gim, double u, double v, int ch);

/// Applies R to the (x, y, z) channels; other channels are untouched.
GeometryImage rotate_positions(const GeometryImage& gim, const Mat3& rotation);

/// Container: one JSON header line {resolution, channels, channel_names,
/// dtype: "f32-le"} then raw little-endian float32 in (row, column, channel)
/// order.
void save_gim(const GeometryImage& gim, const std::filesystem::path& path);
GeometryImage load_gim(const std::filesystem::path& path);

}  // namespace surfnet
