#include "surfnet/dataset.hpp"

#include "surfnet/error.hpp"
#include "surfnet/parallel.hpp"
#include "surfnet/sphere_param.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace surfnet {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ViewAngles> view_grid(const std::vector<double>& elevations, const std::vector<double>& azimuths) {
  std::vector<ViewAngles> out;
  for (double el : elevations)
    for (double az : azimuths) out.push_back({az, el});
  return out;
}

std::vector<ViewAngles> azimuth_ring(int count, double step_deg, double elevation) {
  std::vector<ViewAngles> out;
  for (int i = 0; i < count; ++i) out.push_back({i * step_deg, elevation});
  return out;
}

json FamilySpec::to_json() const {
  json views_j = json::array();
  for (const auto& v : views) views_j.push_back({v.azimuth, v.elevation});
  return {{"family", family}, {"eps1", eps1},   {"eps2", eps2},     {"a", a},
          {"b", b},           {"c", c},         {"lattice", lattice}, {"levels", levels},
          {"count", count},   {"subdivisions", subdivisions},         {"gim_res", gim_res},
          {"image_res", image_res},             {"views", views_j},   {"threshold", threshold}};
}

FamilySpec FamilySpec::from_json(const json& j) {
  try {
    FamilySpec s;
    s.family = j.at("family").get<std::string>();
    s.eps1 = j.at("eps1").get<std::array<double, 2>>();
    s.eps2 = j.at("eps2").get<std::array<double, 2>>();
    s.a = j.at("a").get<std::array<double, 2>>();
    s.b = j.at("b").get<std::array<double, 2>>();
    s.c = j.at("c").get<std::array<double, 2>>();
    s.lattice = j.at("lattice").get<bool>();
    s.levels = j.at("levels").get<int>();
    s.count = j.at("count").get<int>();
    s.subdivisions = j.at("subdivisions").get<int>();
    s.gim_res = j.at("gim_res").get<int>();
    s.image_res = j.at("image_res").get<int>();
    s.views.clear();
    for (const auto& v : j.at("views")) s.views.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    s.threshold = j.at("threshold").get<double>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("family spec: ") + e.what());
  }
}

void FamilySpec::validate() const {
  require(family == "superellipsoid", ErrorCode::InvalidArgument, "unsupported family '" + family + "'");
  for (const auto& r : {eps1, eps2, a, b, c})
    require(r[0] > 0.0 && r[1] >= r[0], ErrorCode::InvalidArgument, "family ranges must be positive and ordered");
  require(!lattice || levels >= 1, ErrorCode::InvalidArgument, "lattice levels must be positive");
  require(lattice || count >= 1, ErrorCode::InvalidArgument, "count must be positive");
  require(subdivisions >= 1 && subdivisions <= 6, ErrorCode::InvalidArgument, "subdivisions must be in [1, 6]");
  require(gim_res >= 2 && gim_res % 2 == 0, ErrorCode::InvalidArgument, "gim_res must be even");
  require(image_res >= 8, ErrorCode::InvalidArgument, "image_res must be at least 8");
  require(threshold >= 0.0, ErrorCode::InvalidArgument, "threshold must be non-negative");
}

std::vector<int> Family::accepted() const {
  std::vector<int> out;
  for (const auto& s : shapes)
    if (s.accepted) out.push_back(s.id);
  return out;
}

namespace {

double level(const std::array<double, 2>& r, int i, int levels) {
  return levels == 1 ? 0.5 * (r[0] + r[1]) : r[0] + (r[1] - r[0]) * i / (levels - 1);
}

// Lattice axes are eps1, eps2 and a; b and c take their range midpoints.
shapes::SuperellipsoidParams lattice_member(const FamilySpec& s, int i, int j, int k) {
  return {level(s.eps1, i, s.levels), level(s.eps2, j, s.levels), level(s.a, k, s.levels), level(s.b, 0, 1),
          level(s.c, 0, 1)};
}

shapes::SuperellipsoidParams draw(const FamilySpec& s, std::mt19937_64& rng) {
  auto u = [&](const std::array<double, 2>& r) { return std::uniform_real_distribution<double>(r[0], r[1])(rng); };
  shapes::SuperellipsoidParams p;
  p.eps1 = u(s.eps1);
  p.eps2 = u(s.eps2);
  p.a = u(s.a);
  p.b = u(s.b);
  p.c = u(s.c);
  return p;
}

bool valid_genus0(const TriMesh& m) {
  try {
    validate(m);
    return euler_genus(m).genus == 0;
  } catch (const Error&) {
    return false;
  }
}

json params_json(const shapes::SuperellipsoidParams& p) {
  return {{"eps1", p.eps1}, {"eps2", p.eps2}, {"a", p.a}, {"b", p.b}, {"c", p.c}};
}

shapes::SuperellipsoidParams params_from_json(const json& j) {
  return {j.at("eps1").get<double>(), j.at("eps2").get<double>(), j.at("a").get<double>(), j.at("b").get<double>(),
          j.at("c").get<double>()};
}

std::string angle_tag(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", deg);
  return buf;
}

}  // namespace

std::vector<shapes::SuperellipsoidParams> family_parameters(const FamilySpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<shapes::SuperellipsoidParams> out;
  if (spec.lattice) {
    for (int i = 0; i < spec.levels; ++i)
      for (int j = 0; j < spec.levels; ++j)
        for (int k = 0; k < spec.levels; ++k) out.push_back(lattice_member(spec, i, j, k));
  } else {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < spec.count; ++i) out.push_back(draw(spec, rng));
  }
  return out;
}

DenseCorrespondence shared_connectivity_map(const TriMesh& b, const TriMesh& m) {
  require(b.faces == m.faces && b.vertices.size() == m.vertices.size(), ErrorCode::InvalidArgument,
          "shared_connectivity_map: meshes do not share connectivity");
  DenseCorrespondence map = identity_map(ParametrizedMesh{m, {}});
  map.source_fingerprint = topology_fingerprint(b);
  return map;
}

Family build_family(const FamilySpec& spec, std::uint64_t seed, unsigned workers) {
  auto params = family_parameters(spec, seed);
  Family fam;
  fam.spec = spec;
  fam.seed = seed;
  std::mt19937_64 redraw(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<bool> ok(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    ShapeRecord r;
    r.id = static_cast<int>(i);
    r.params = params[i];
    r.mesh = shapes::superellipsoid(r.params, spec.subdivisions);
    for (int attempt = 0; !spec.lattice && attempt < 10 && !valid_genus0(r.mesh); ++attempt) {
      r.params = draw(spec, redraw);
      r.mesh = shapes::superellipsoid(r.params, spec.subdivisions);
    }
    ok[i] = valid_genus0(r.mesh);
    fam.shapes.push_back(std::move(r));
  }
  // Base: the member nearest the middle of the parameter box.
  const shapes::SuperellipsoidParams mid = lattice_member(spec, 0, 0, 0);
  const shapes::SuperellipsoidParams center{level(spec.eps1, 0, 1), level(spec.eps2, 0, 1), level(spec.a, 0, 1),
                                            mid.b, mid.c};
  auto gap = [&](const shapes::SuperellipsoidParams& p) {
    auto t = [](double v, const std::array<double, 2>& r, double c) { return r[1] > r[0] ? (v - c) / (r[1] - r[0]) : 0.0; };
    return std::hypot(t(p.eps1, spec.eps1, center.eps1), t(p.eps2, spec.eps2, center.eps2), t(p.a, spec.a, center.a)) +
           std::hypot(t(p.b, spec.b, center.b), t(p.c, spec.c, center.c));
  };
  int base = -1;
  for (std::size_t i = 0; i < fam.shapes.size(); ++i)
    if (ok[i] && (base < 0 || gap(fam.shapes[i].params) < gap(fam.shapes[base].params))) base = static_cast<int>(i);
  require(base >= 0, ErrorCode::Topology, "no family member is a valid genus-0 mesh");
  fam.base_index = base;
  fam.base.mesh = fam.shapes[base].mesh;
  fam.base.param = parametrize_authalic(fam.base.mesh);

  parallel_for(fam.shapes.size(), [&](std::size_t i) {
    ShapeRecord& r = fam.shapes[i];
    if (!ok[i]) {
      r.accepted = false;
      r.reconstruction_error = std::numeric_limits<double>::infinity();
      return;
    }
    const DenseCorrespondence map = shared_connectivity_map(fam.base.mesh, r.mesh);
    const Selection sel = select_map_and_filter(r.mesh, fam.base, {map}, spec.threshold, spec.gim_res);
    r.reconstruction_error = sel.errors[sel.chosen];
    r.accepted = sel.accepted;
    auto fields = position_fields(r.mesh);
    fields.push_back({"curvature", mean_curvature(r.mesh).values});
    r.gim = consistent_geometry_image(r.mesh, fam.base, map, spec.gim_res, fields);
  }, workers);
  return fam;
}

void save_sphere_param(const TriMesh& mesh, const SphericalParam& param, const fs::path& path) {
  require(param.positions.size() == mesh.vertices.size(), ErrorCode::InvalidArgument,
          "sphere parametrization does not match the mesh");
  TriMesh s{param.positions, mesh.faces};
  save_obj(s, path);
}

SphericalParam load_sphere_param(const TriMesh& mesh, const fs::path& path) {
  const TriMesh s = load_obj(path);
  require(s.faces == mesh.faces && s.vertices.size() == mesh.vertices.size(), ErrorCode::Parse,
          path.string() + ": sphere parametrization does not match the mesh");
  SphericalParam p;
  p.positions = s.vertices;
  p.mesh_fingerprint = topology_fingerprint(mesh);
  return p;
}

json write_dataset(const Family& family, const fs::path& dir, unsigned workers) {
  fs::create_directories(dir / "meshes");
  fs::create_directories(dir / "gims");
  fs::create_directories(dir / "depth");
  std::vector<json> entries(family.shapes.size());
  parallel_for(family.shapes.size(), [&](std::size_t i) {
    const ShapeRecord& r = family.shapes[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "shape_%03d", r.id);
    const std::string obj = std::string("meshes/") + stem + ".obj";
    const std::string gim = std::string("gims/") + stem + ".gim";
    json entry = {{"id", r.id},
                  {"params", params_json(r.params)},
                  {"class", r.id},
                  {"accepted", r.accepted},
                  {"reconstruction_error", std::isfinite(r.reconstruction_error) ? json(r.reconstruction_error) : json(nullptr)},
                  {"threshold", family.spec.threshold}};
    if (!r.mesh.empty()) {
      save_obj(r.mesh, dir / obj);
      entry["obj"] = obj;
    }
    if (r.gim.resolution > 0) {
      save_gim(r.gim, dir / gim);
      entry["gim"] = gim;
    }
    json depth = json::array();
    if (r.accepted)
      for (const auto& v : family.spec.views) {
        const std::string pgm = std::string("depth/") + stem + "_az" + angle_tag(v.azimuth) + "_el" + angle_tag(v.elevation) + ".pgm";
        save_pgm(render_depth(r.mesh, v.azimuth, v.elevation, family.spec.image_res), dir / pgm);
        depth.push_back({{"azimuth", v.azimuth}, {"elevation", v.elevation}, {"pgm", pgm}});
      }
    entry["depth"] = depth;
    entries[i] = std::move(entry);
  }, workers);
  json samples = json::array();
  for (auto& e : entries) samples.push_back(std::move(e));
  save_sphere_param(family.base.mesh, family.base.param, dir / "base_sphere.obj");
  json manifest = {{"format", "surfnet-dataset"},
                   {"version", 1},
                   {"seed", family.seed},
                   {"spec", family.spec.to_json()},
                   {"base", {{"index", family.base_index}, {"sphere", "base_sphere.obj"}}},
                   {"channels", {"x", "y", "z", "curvature"}},
                   {"samples", samples}};
  std::ofstream out(dir / "manifest.json");
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  return manifest;
}

Family load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  require(static_cast<bool>(in), ErrorCode::Io, "missing dataset manifest " + mpath.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, mpath.string() + ": " + e.what());
  }
  require(m.value("format", "") == "surfnet-dataset", ErrorCode::Parse, mpath.string() + ": not a dataset manifest");
  Family fam;
  try {
    fam.spec = FamilySpec::from_json(m.at("spec"));
    fam.seed = m.at("seed").get<std::uint64_t>();
    fam.base_index = m.at("base").at("index").get<int>();
    for (const auto& e : m.at("samples")) {
      ShapeRecord r;
      r.id = e.at("id").get<int>();
      r.params = params_from_json(e.at("params"));
      r.accepted = e.at("accepted").get<bool>();
      r.reconstruction_error = e.at("reconstruction_error").is_null() ? std::numeric_limits<double>::infinity()
                                                                      : e.at("reconstruction_error").get<double>();
      if (e.contains("obj")) r.mesh = load_obj(dir / e.at("obj").get<std::string>());
      if (e.contains("gim")) r.gim = load_gim(dir / e.at("gim").get<std::string>());
      fam.shapes.push_back(std::move(r));
    }
    require(fam.base_index >= 0 && static_cast<std::size_t>(fam.base_index) < fam.shapes.size(), ErrorCode::Parse,
            mpath.string() + ": base index out of range");
    fam.base.mesh = fam.shapes[fam.base_index].mesh;
    fam.base.param = load_sphere_param(fam.base.mesh, dir / m.at("base").at("sphere").get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, mpath.string() + ": " + e.what());
  }
  return fam;
}

}  // namespace surfnet
