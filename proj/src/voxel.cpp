#include "surfnet/voxel.hpp"

#include "surfnet/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <unordered_map>

namespace surfnet {

std::size_t OccupancyGrid::occupied() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

bool is_closed(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(mesh.faces.size() * 2);
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[(static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b)];
    }
  return std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second % 2 == 0; });
}

// Akenine-Moller triangle/box overlap via separating axes.
bool triangle_box_overlap(const Vec3& center, double half, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 v0 = a - center, v1 = b - center, v2 = c - center;
  const Vec3 e[3] = {v1 - v0, v2 - v1, v0 - v2};
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (const auto& ed : e)
    for (const auto& ax : axes) {
      const Vec3 l = ax.cross(ed);
      const double p0 = l.dot(v0), p1 = l.dot(v1), p2 = l.dot(v2);
      const double r = half * (std::abs(l.x()) + std::abs(l.y()) + std::abs(l.z()));
      if (std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r) return false;
    }
  for (int d = 0; d < 3; ++d)
    if (std::min({v0[d], v1[d], v2[d]}) > half || std::max({v0[d], v1[d], v2[d]}) < -half) return false;
  const Vec3 n = e[0].cross(e[1]);
  const double r = half * (std::abs(n.x()) + std::abs(n.y()) + std::abs(n.z()));
  return std::abs(n.dot(v0)) <= r;
}

}  // namespace

OccupancyGrid voxelize(const TriMesh& mesh, int resolution, VoxelMode mode, std::uint64_t seed) {
  require(!mesh.empty() && !mesh.vertices.empty(), ErrorCode::InvalidArgument, "cannot voxelize an empty mesh");
  require(resolution >= 8, ErrorCode::InvalidArgument, "voxel resolution must be >= 8");
  check_indices(mesh);
  Vec3 lo, hi;
  bounding_box(mesh.vertices, lo, hi);
  const Vec3 extent = hi - lo;
  const double max_extent = extent.maxCoeff();
  require(max_extent > 0.0, ErrorCode::InvalidArgument, "mesh has zero extent");
  const double cell = max_extent / resolution;
  int dims[3];
  for (int d = 0; d < 3; ++d)
    dims[d] = std::max(1, static_cast<int>(std::ceil(extent[d] / cell - 1e-9))) + 4;
  OccupancyGrid grid(dims[0], dims[1], dims[2], lo - Vec3::Constant(2.0 * cell), cell);

  if (mode == VoxelMode::Solid && !is_closed(mesh)) {
    mode = VoxelMode::Shell;
    grid.fell_back_to_shell = true;
  }

  auto cell_range = [&](double a, double b, int d) {
    int i0 = static_cast<int>(std::floor((a - grid.origin[d]) / cell));
    int i1 = static_cast<int>(std::floor((b - grid.origin[d]) / cell));
    return std::pair<int, int>{std::clamp(i0, 0, dims[d] - 1), std::clamp(i1, 0, dims[d] - 1)};
  };

  if (mode == VoxelMode::Shell) {
    for (const auto& f : mesh.faces) {
      const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
      const Vec3 tlo = a.cwiseMin(b).cwiseMin(c), thi = a.cwiseMax(b).cwiseMax(c);
      auto [i0, i1] = cell_range(tlo.x(), thi.x(), 0);
      auto [j0, j1] = cell_range(tlo.y(), thi.y(), 1);
      auto [k0, k1] = cell_range(tlo.z(), thi.z(), 2);
      for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
          for (int i = i0; i <= i1; ++i)
            if (!grid.at(i, j, k) && triangle_box_overlap(grid.cell_center(i, j, k), 0.5 * cell, a, b, c))
              grid.set(i, j, k);
    }
    return grid;
  }

  // Solid: parity of +x ray crossings per (y, z) row. Rows are jittered by a
  // tiny seeded offset so rays never graze edges or vertices.
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(dims[1]) * dims[2]);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    auto [j0, j1] = cell_range(std::min({a.y(), b.y(), c.y()}) - cell, std::max({a.y(), b.y(), c.y()}) + cell, 1);
    auto [k0, k1] = cell_range(std::min({a.z(), b.z(), c.z()}) - cell, std::max({a.z(), b.z(), c.z()}) + cell, 2);
    for (int k = k0; k <= k1; ++k)
      for (int j = j0; j <= j1; ++j) rows[static_cast<std::size_t>(k) * dims[1] + j].push_back(static_cast<int>(f));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.5e-6, 0.5e-6);
  std::vector<double> hits;
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j) {
      const double y = grid.origin.y() + (j + 0.5 + jitter(rng)) * cell;
      const double z = grid.origin.z() + (k + 0.5 + jitter(rng)) * cell;
      hits.clear();
      for (int f : rows[static_cast<std::size_t>(k) * dims[1] + j]) {
        const auto& t = mesh.faces[f];
        const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
        // 2D barycentrics of (y, z) in the projected triangle.
        const double d = (b.y() - a.y()) * (c.z() - a.z()) - (c.y() - a.y()) * (b.z() - a.z());
        if (d == 0.0) continue;
        const double w1 = ((y - a.y()) * (c.z() - a.z()) - (c.y() - a.y()) * (z - a.z())) / d;
        const double w2 = ((b.y() - a.y()) * (z - a.z()) - (y - a.y()) * (b.z() - a.z())) / d;
        const double w0 = 1.0 - w1 - w2;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        hits.push_back(w0 * a.x() + w1 * b.x() + w2 * c.x());
      }
      std::sort(hits.begin(), hits.end());
      std::size_t h = 0;
      for (int i = 0; i < dims[0]; ++i) {
        const double x = grid.origin.x() + (i + 0.5) * cell;
        while (h < hits.size() && hits[h] < x) ++h;
        if (h % 2 == 1) grid.set(i, j, k);
      }
    }
  return grid;
}

// ---------------------------------------------------------------------------
// Surface extraction

namespace {

constexpr int kDirs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
// Corner offsets of the outward-oriented quad for each direction.
constexpr int kQuadCorners[6][4][3] = {
    {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}},
    {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}},
    {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}},
    {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}},
    {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}},
    {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}},
};

struct Quad {
  std::int64_t cell;   // occupied cell index
  std::int64_t empty;  // neighbor cell key in the padded (n+2)^3 space
  std::array<std::int64_t, 4> corners;
};

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

void keep_largest_component(OccupancyGrid& g, SurfaceRepairReport& rep) {
  std::vector<int> label(g.bits.size(), -1);
  std::vector<std::size_t> sizes;
  std::queue<std::array<int, 3>> q;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        if (!g.at(i, j, k) || label[g.index(i, j, k)] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        label[g.index(i, j, k)] = id;
        q.push({i, j, k});
        while (!q.empty()) {
          auto [a, b, c] = q.front();
          q.pop();
          ++sizes[id];
          for (const auto& d : kDirs) {
            int x = a + d[0], y = b + d[1], z = c + d[2];
            if (g.at(x, y, z) && label[g.index(x, y, z)] < 0) {
              label[g.index(x, y, z)] = id;
              q.push({x, y, z});
            }
          }
        }
      }
  if (sizes.size() <= 1) return;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t c = 0; c < g.bits.size(); ++c)
    if (g.bits[c] && label[c] != best) g.bits[c] = 0;
  rep.removed_components += sizes.size() - 1;
}

void fill_cavities(OccupancyGrid& g, SurfaceRepairReport& rep) {
  std::vector<char> outside(g.bits.size(), 0);
  std::queue<std::array<int, 3>> q;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const bool border = i == 0 || j == 0 || k == 0 || i == g.nx - 1 || j == g.ny - 1 || k == g.nz - 1;
        if (border && !g.at(i, j, k)) {
          outside[g.index(i, j, k)] = 1;
          q.push({i, j, k});
        }
      }
  while (!q.empty()) {
    auto [a, b, c] = q.front();
    q.pop();
    for (const auto& d : kDirs) {
      int x = a + d[0], y = b + d[1], z = c + d[2];
      if (g.in_bounds(x, y, z) && !g.at(x, y, z) && !outside[g.index(x, y, z)]) {
        outside[g.index(x, y, z)] = 1;
        q.push({x, y, z});
      }
    }
  }
  for (std::size_t c = 0; c < g.bits.size(); ++c)
    if (!g.bits[c] && !outside[c]) {
      g.bits[c] = 1;
      ++rep.filled_cavities;
    }
}

struct Extraction {
  TriMesh mesh;
  std::vector<std::int64_t> conflict_cells;  // empty cells (padded keys) to fill
  std::size_t pinch_edges = 0;
  std::size_t split_vertices = 0;
};

Extraction try_extract(const OccupancyGrid& g) {
  const std::int64_t lx = g.nx + 1, ly = g.ny + 1;
  auto lattice = [&](int i, int j, int k) { return (static_cast<std::int64_t>(k) * ly + j) * lx + i; };
  const std::int64_t px = g.nx + 2, py = g.ny + 2;
  auto padded = [&](int i, int j, int k) {
    return (static_cast<std::int64_t>(k + 1) * py + (j + 1)) * px + (i + 1);
  };

  std::vector<Quad> quads;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        if (!g.at(i, j, k)) continue;
        for (int d = 0; d < 6; ++d) {
          const int x = i + kDirs[d][0], y = j + kDirs[d][1], z = k + kDirs[d][2];
          if (g.at(x, y, z)) continue;
          Quad q;
          q.cell = padded(i, j, k);
          q.empty = padded(x, y, z);
          for (int m = 0; m < 4; ++m)
            q.corners[m] = lattice(i + kQuadCorners[d][m][0], j + kQuadCorners[d][m][1], k + kQuadCorners[d][m][2]);
          quads.push_back(q);
        }
      }

  // Edge incidence: (quad, local edge m) where the edge runs corners[m] -> corners[m+1].
  std::unordered_map<std::uint64_t, std::vector<std::pair<int, int>>> edges;
  edges.reserve(quads.size() * 2);
  auto ekey = [](std::int64_t a, std::int64_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  };
  for (std::size_t qi = 0; qi < quads.size(); ++qi)
    for (int m = 0; m < 4; ++m)
      edges[ekey(quads[qi].corners[m], quads[qi].corners[(m + 1) % 4])].push_back({static_cast<int>(qi), m});

  struct Pinch {
    std::array<std::pair<int, int>, 4> inc;
    bool via_empty = false;
  };
  std::vector<Pinch> pinches;
  // partner[q*4+m] = (quad, edge) across edge m of quad q
  std::vector<std::pair<int, int>> partner(quads.size() * 4, {-1, -1});
  for (auto& [key, inc] : edges) {
    if (inc.size() == 2) {
      partner[inc[0].first * 4 + inc[0].second] = inc[1];
      partner[inc[1].first * 4 + inc[1].second] = inc[0];
    } else if (inc.size() == 4) {
      Pinch p;
      std::copy(inc.begin(), inc.end(), p.inc.begin());
      std::sort(p.inc.begin(), p.inc.end());
      pinches.push_back(p);
    } else {
      fail(ErrorCode::Topology, "cuberille edge with " + std::to_string(inc.size()) + " incident quads");
    }
  }
  std::sort(pinches.begin(), pinches.end(), [](const Pinch& a, const Pinch& b) { return a.inc < b.inc; });

  auto apply_pinch = [&](const Pinch& p) {
    for (const auto& a : p.inc)
      for (const auto& b : p.inc) {
        if (a == b) continue;
        const Quad &qa = quads[a.first], &qb = quads[b.first];
        const bool match = p.via_empty ? (qa.cell != qb.cell && qa.empty == qb.empty) : (qa.cell == qb.cell);
        if (match) partner[a.first * 4 + a.second] = b;
      }
  };

  auto corner_index = [&](int q, std::int64_t lat) {
    for (int m = 0; m < 4; ++m)
      if (quads[q].corners[m] == lat) return m;
    return -1;
  };

  Extraction out;
  out.pinch_edges = pinches.size();
  std::vector<int> conflicted;
  for (int round = 0; round < 16; ++round) {
    for (const auto& p : pinches) apply_pinch(p);
    UnionFind uf(quads.size() * 4);
    for (std::size_t q = 0; q < quads.size(); ++q)
      for (int m = 0; m < 4; ++m) {
        const auto [pq, pm] = partner[q * 4 + m];
        for (int end = 0; end < 2; ++end) {
          const std::int64_t lat = quads[q].corners[(m + end) % 4];
          uf.unite(static_cast<int>(q * 4 + (m + end) % 4), pq * 4 + corner_index(pq, lat));
        }
      }
    conflicted.clear();
    for (std::size_t pi = 0; pi < pinches.size(); ++pi) {
      const auto& p = pinches[pi];
      // Endpoint copies of each pair: the pair containing inc[0] vs the other.
      const auto first = p.inc[0];
      const auto mate = partner[first.first * 4 + first.second];
      std::pair<int, int> other{-1, -1};
      for (const auto& e : p.inc)
        if (e != first && e != mate) other = e;
      auto ends = [&](std::pair<int, int> e) {
        int a = uf.find(e.first * 4 + e.second), b = uf.find(e.first * 4 + (e.second + 1) % 4);
        return std::minmax(a, b);
      };
      if (ends(first) == ends(other)) conflicted.push_back(static_cast<int>(pi));
    }
    if (conflicted.empty()) {
      // Emit vertices per union-find root, faces per quad.
      std::unordered_map<int, int> vid;
      const std::int64_t lxy = lx * ly;
      auto vertex = [&](int node, std::int64_t lat) {
        const int root = uf.find(node);
        auto it = vid.find(root);
        if (it != vid.end()) return it->second;
        const int id = static_cast<int>(out.mesh.vertices.size());
        const double i = static_cast<double>(lat % lx), j = static_cast<double>((lat / lx) % ly),
                     k = static_cast<double>(lat / lxy);
        out.mesh.vertices.push_back(g.origin + g.cell_size * Vec3(i, j, k));
        vid.emplace(root, id);
        return id;
      };
      for (std::size_t q = 0; q < quads.size(); ++q) {
        int v[4];
        for (int m = 0; m < 4; ++m) v[m] = vertex(static_cast<int>(q * 4 + m), quads[q].corners[m]);
        out.mesh.faces.push_back({v[0], v[1], v[2]});
        out.mesh.faces.push_back({v[0], v[2], v[3]});
      }
      std::unordered_map<std::int64_t, int> copies;
      for (const auto& entry : vid) ++copies[quads[entry.first / 4].corners[entry.first % 4]];
      for (const auto& [lat, c] : copies) out.split_vertices += static_cast<std::size_t>(c - 1);
      return out;
    }
    for (int pi : conflicted) pinches[pi].via_empty = !pinches[pi].via_empty;
  }
  // Could not pick consistent pairings: ask the caller to fill one empty cell
  // next to each remaining conflicted edge.
  for (int pi : conflicted) {
    const auto& p = pinches[pi];
    std::int64_t e = quads[p.inc[0].first].empty;
    for (const auto& inc : p.inc) e = std::min(e, quads[inc.first].empty);
    out.conflict_cells.push_back(e);
  }
  return out;
}

}  // namespace

TriMesh extract_surface(OccupancyGrid& grid, SurfaceRepairReport* report) {
  SurfaceRepairReport rep;
  require(grid.occupied() > 0, ErrorCode::InvalidArgument, "grid has no occupied cells");
  for (int attempt = 0;; ++attempt) {
    keep_largest_component(grid, rep);
    fill_cavities(grid, rep);
    Extraction ex = try_extract(grid);
    if (attempt == 0) rep.pinch_edges = ex.pinch_edges;
    if (ex.conflict_cells.empty()) {
      rep.split_vertices = ex.split_vertices;
      if (report) *report = rep;
      return std::move(ex.mesh);
    }
    require(attempt < 64, ErrorCode::Topology, "could not resolve non-manifold voxel configuration");
    const std::int64_t px = grid.nx + 2, py = grid.ny + 2;
    for (std::int64_t key : ex.conflict_cells) {
      const int i = static_cast<int>(key % px) - 1, j = static_cast<int>((key / px) % py) - 1,
                k = static_cast<int>(key / (px * py)) - 1;
      if (grid.in_bounds(i, j, k) && !grid.at(i, j, k)) {
        grid.set(i, j, k);
        ++rep.filled_cells;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Grid dump

void save_grid(const OccupancyGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  nlohmann::json header = {{"resolution", {grid.nx, grid.ny, grid.nz}},
                           {"origin", {grid.origin.x(), grid.origin.y(), grid.origin.z()}},
                           {"cell_size", grid.cell_size},
                           {"encoding", "rle-alternating-from-zero"}};
  out << header.dump() << '\n';
  std::uint8_t current = 0;
  std::size_t run = 0;
  bool first = true;
  auto flush = [&] {
    out << (first ? "" : " ") << run;
    first = false;
  };
  for (auto b : grid.bits) {
    if (b != current) {
      flush();
      current = b;
      run = 0;
    }
    ++run;
  }
  flush();
  out << '\n';
}

OccupancyGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::string header_line, body;
  std::getline(in, header_line);
  std::getline(in, body);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const std::exception& e) {
    fail(ErrorCode::Parse, std::string("grid header: ") + e.what());
  }
  const auto res = header.at("resolution");
  const auto o = header.at("origin");
  OccupancyGrid g(res[0].get<int>(), res[1].get<int>(), res[2].get<int>(),
                  Vec3(o[0].get<double>(), o[1].get<double>(), o[2].get<double>()), header.at("cell_size").get<double>());
  std::istringstream runs(body);
  std::size_t pos = 0, run = 0;
  std::uint8_t current = 0;
  while (runs >> run) {
    require(pos + run <= g.bits.size(), ErrorCode::Parse, "grid run lengths exceed grid size");
    std::fill(g.bits.begin() + static_cast<long>(pos), g.bits.begin() + static_cast<long>(pos + run), current);
    pos += run;
    current ^= 1;
  }
  require(pos == g.bits.size(), ErrorCode::Parse, "grid run lengths do not cover the grid");
  return g;
}

}  // namespace surfnet
