#pragma once

#include "surfnet/correspondence.hpp"
#include "surfnet/geometry_image.hpp"
#include "surfnet/render.hpp"
#include "surfnet/shapes.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace surfnet {

struct ViewAngles {
  double azimuth = 0.0;
  double elevation = 0.0;
};

/// Cartesian product elevations x azimuths, elevation-major.
std::vector<ViewAngles> view_grid(const std::vector<double>& elevations, const std::vector<double>& azimuths);
/// Azimuths 0, step, 2 step, ... (count of them) at one elevation.
std::vector<ViewAngles> azimuth_ring(int count, double step_deg, double elevation = 0.0);

/// Synthetic superellipsoid family. Each axis is a closed range; a lattice
/// takes `levels` evenly spaced values per axis, otherwise `count` shapes
/// are drawn uniformly from the ranges.
struct FamilySpec {
  std::string family = "superellipsoid";
  std::array<double, 2> eps1{0.6, 1.4};
  std::array<double, 2> eps2{0.6, 1.4};
  std::array<double, 2> a{0.8, 1.25};
  std::array<double, 2> b{1.0, 1.0};
  std::array<double, 2> c{1.3, 1.3};
  bool lattice = true;
  int levels = 3;
  int count = 27;
  int subdivisions = 4;
  int gim_res = 64;
  int image_res = 128;
  std::vector<ViewAngles> views = view_grid({0, 15, 30, 45}, {0, 15, 30, 45, 60, 75, 90, 105, 120, 135, 150, 165,
                                                              180, 195, 210, 225, 240, 255, 270, 285, 300, 315, 330, 345});
  /// Reconstruction-error acceptance threshold, model units.
  double threshold = 0.05;

  nlohmann::json to_json() const;
  static FamilySpec from_json(const nlohmann::json& j);
  void validate() const;
};

struct ShapeRecord {
  int id = 0;
  shapes::SuperellipsoidParams params;
  TriMesh mesh;
  /// Channels x, y, z, curvature on the base parametrization.
  GeometryImage gim;
  double reconstruction_error = 0.0;
  bool accepted = false;
};

struct Family {
  FamilySpec spec;
  std::uint64_t seed = 0;
  int base_index = 0;
  ParametrizedMesh base;
  std::vector<ShapeRecord> shapes;

  std::vector<int> accepted() const;
};

/// Parameter sets in sample order (lattice order or seeded draws).
std::vector<shapes::SuperellipsoidParams> family_parameters(const FamilySpec& spec, std::uint64_t seed);

/// Builds every member, parametrizes the base shape (the lattice center, or
/// the member closest to the range midpoint), encodes each member on it
/// through the shared-connectivity correspondence and filters with
/// select_map_and_filter. Members whose mesh fails validation are redrawn
/// (random mode, at most 10 times) or rejected (lattice mode). Members are
/// encoded on up to `workers` threads (0: one per hardware thread); the
/// result does not depend on the count.
Family build_family(const FamilySpec& spec, std::uint64_t seed, unsigned workers = 0);

/// B -> M map between meshes with identical connectivity: vertex i of B goes
/// to vertex i of M.
DenseCorrespondence shared_connectivity_map(const TriMesh& b, const TriMesh& m);

/// Writes meshes, GIM containers, depth PGMs over spec.views and
/// manifest.json under dir; returns the manifest.
/// Samples are written on up to `workers` threads; the manifest keeps
/// sample order.
nlohmann::json write_dataset(const Family& family, const std::filesystem::path& dir, unsigned workers = 0);
/// Reloads a dataset written by write_dataset (meshes, GIMs, base param).
Family load_dataset(const std::filesystem::path& dir);

/// Base sphere parametrization stored as an OBJ whose vertices are the
/// sphere positions.
void save_sphere_param(const TriMesh& mesh, const SphericalParam& param, const std::filesystem::path& path);
SphericalParam load_sphere_param(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace surfnet
