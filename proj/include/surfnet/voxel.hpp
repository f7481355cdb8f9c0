#pragma once

#include "surfnet/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace surfnet {

enum class VoxelMode {
  /// Occupied iff the cell center is inside the surface (ray parity).
  Solid,
  /// Occupied iff the cell intersects a triangle.
  Shell,
};

struct OccupancyGrid {
  int nx = 0, ny = 0, nz = 0;
  Vec3 origin = Vec3::Zero();
  double cell_size = 1.0;
  std::vector<std::uint8_t> bits;
  /// Set when a solid voxelization fell back to shell mode on an open input.
  bool fell_back_to_shell = false;

  OccupancyGrid() = default;
  OccupancyGrid(int x, int y, int z, const Vec3& o, double cell)
      : nx(x), ny(y), nz(z), origin(o), cell_size(cell), bits(static_cast<std::size_t>(x) * y * z, 0) {}

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz;
  }
  bool at(int i, int j, int k) const { return in_bounds(i, j, k) && bits[index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool v = true) { bits[index(i, j, k)] = v ? 1 : 0; }
  std::size_t occupied() const;
  Vec3 cell_center(int i, int j, int k) const {
    return origin + cell_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
};

/// Bounds are the mesh bounding box padded by 2 cells; the longest axis gets
/// `resolution` cells. Solid mode on an open mesh falls back to shell mode.
OccupancyGrid voxelize(const TriMesh& mesh, int resolution, VoxelMode mode = VoxelMode::Solid,
                       std::uint64_t seed = 0x5eed);

struct SurfaceRepairReport {
  std::size_t removed_components = 0;  ///< occupied components dropped
  std::size_t filled_cavities = 0;     ///< enclosed empty cells filled
  std::size_t pinch_edges = 0;         ///< input edges shared by 4 boundary quads
  std::size_t split_vertices = 0;      ///< extra vertex copies created
  std::size_t filled_cells = 0;        ///< cells filled to break unresolvable pinches
};

/// Boundary-quad (cuberille) surface of the largest 6-connected occupied
/// component. Non-manifold pinches are resolved by vertex duplication; the
/// result is closed, oriented and edge-manifold. The grid is updated in place
/// when cells had to be dropped or filled.
TriMesh extract_surface(OccupancyGrid& grid, SurfaceRepairReport* report = nullptr);

/// JSON header line followed by a run-length encoded bitstream.
void save_grid(const OccupancyGrid& grid, const std::filesystem::path& path);
OccupancyGrid load_grid(const std::filesystem::path& path);

}  // namespace surfnet
