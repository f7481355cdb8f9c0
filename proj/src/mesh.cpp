#include "surfnet/mesh.hpp"

#include "surfnet/error.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace surfnet {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    fail(ErrorCode::Parse, "OBJ line " + std::to_string(line) + ": bad number '" + std::string(tok) + "'");
  return v;
}

long parse_index(std::string_view tok, std::size_t line) {
  tok = tok.substr(0, tok.find('/'));
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || v == 0)
    fail(ErrorCode::Parse, "OBJ line " + std::to_string(line) + ": bad face index '" + std::string(tok) + "'");
  return v;
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

// ---- I/O ------------------------------------------------------------------

TriMesh parse_obj(const std::string& text) {
  TriMesh mesh;
  std::vector<std::pair<Face, std::size_t>> pending;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto toks = split_ws(line);
    if (toks[0] == "v") {
      if (toks.size() < 4)
        fail(ErrorCode::Parse, "OBJ line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
      mesh.vertices.emplace_back(parse_double(toks[1], line_no), parse_double(toks[2], line_no),
                                 parse_double(toks[3], line_no));
    } else if (toks[0] == "f") {
      if (toks.size() < 4)
        fail(ErrorCode::Parse, "OBJ line " + std::to_string(line_no) + ": face needs at least 3 indices");
      std::vector<int> idx;
      for (std::size_t k = 1; k < toks.size(); ++k) {
        long i = parse_index(toks[k], line_no);
        long resolved = i > 0 ? i - 1 : static_cast<long>(mesh.vertices.size()) + i;
        if (resolved < 0)
          fail(ErrorCode::Parse, "OBJ line " + std::to_string(line_no) + ": face index out of range");
        idx.push_back(static_cast<int>(resolved));
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        pending.push_back({Face{idx[0], idx[k], idx[k + 1]}, line_no});
    }
  }
  for (const auto& [f, ln] : pending) {
    for (int i : f) {
      if (i < 0 || static_cast<std::size_t>(i) >= mesh.vertices.size())
        fail(ErrorCode::Parse, "OBJ line " + std::to_string(ln) + ": face references vertex " +
                                   std::to_string(i + 1) + " but only " +
                                   std::to_string(mesh.vertices.size()) + " vertices exist");
    }
    mesh.faces.push_back(f);
  }
  return mesh;
}

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str());
}

std::string format_obj(const TriMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
  for (const auto& v : mesh.vertices) {
    out += "v ";
    append_number(out, v.x());
    out += ' ';
    append_number(out, v.y());
    out += ' ';
    append_number(out, v.z());
    out += '\n';
  }
  for (const auto& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' +
           std::to_string(f[2] + 1) + '\n';
  }
  return out;
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << format_obj(mesh);
}

void save_obj_points(std::span<const Vec3> points, const std::filesystem::path& path) {
  TriMesh m;
  m.vertices.assign(points.begin(), points.end());
  save_obj(m, path);
}

// ---- topology -------------------------------------------------------------

void check_indices(const TriMesh& mesh) {
  const int nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    for (int i : t)
      if (i < 0 || i >= nv)
        fail(ErrorCode::Topology, "face " + std::to_string(f) + " has out-of-range index " + std::to_string(i));
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      fail(ErrorCode::Topology, "face " + std::to_string(f) + " is degenerate");
  }
}

int face_components(const TriMesh& mesh, std::vector<int>* labels) {
  const std::size_t nf = mesh.faces.size();
  std::vector<int> parent(nf);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::unordered_map<std::uint64_t, int> first;
  first.reserve(nf * 2);
  for (std::size_t f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      auto key = edge_key(mesh.faces[f][k], mesh.faces[f][(k + 1) % 3]);
      auto [it, inserted] = first.emplace(key, static_cast<int>(f));
      if (!inserted) parent[find(static_cast<int>(f))] = find(it->second);
    }
  }
  std::vector<int> remap(nf, -1);
  int count = 0;
  if (labels) labels->assign(nf, -1);
  for (std::size_t f = 0; f < nf; ++f) {
    int r = find(static_cast<int>(f));
    if (remap[r] < 0) remap[r] = count++;
    if (labels) (*labels)[f] = remap[r];
  }
  return count;
}

void validate(const TriMesh& mesh) {
  if (mesh.faces.empty()) fail(ErrorCode::Topology, "mesh has no faces");
  check_indices(mesh);
  // Directed half-edge counts: a closed oriented manifold has each directed
  // edge exactly once and its reverse exactly once.
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.faces.size() * 4);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
      ++directed[key];
    }
  }
  for (const auto& [key, count] : directed) {
    int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
    auto rev = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b)) << 32) | static_cast<std::uint32_t>(a);
    auto it = directed.find(rev);
    int rcount = it == directed.end() ? 0 : it->second;
    if (count != 1 || rcount != 1) {
      if (count + rcount == 1)
        fail(ErrorCode::Topology, "boundary edge (" + std::to_string(a) + ", " + std::to_string(b) + "): mesh is not closed");
      if (count + rcount == 2)
        fail(ErrorCode::Topology, "inconsistently oriented edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
      fail(ErrorCode::Topology, "non-manifold edge (" + std::to_string(a) + ", " + std::to_string(b) + ") shared by " +
                                    std::to_string(count + rcount) + " faces");
    }
  }
  if (face_components(mesh) != 1) fail(ErrorCode::Topology, "mesh is disconnected");
}

EulerInfo euler_genus(const TriMesh& mesh) {
  validate(mesh);
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& f : mesh.faces)
    for (int i : f) used[i] = 1;
  const long v = std::count(used.begin(), used.end(), 1);
  const long f = static_cast<long>(mesh.faces.size());
  const long e = 3 * f / 2;
  EulerInfo info;
  info.chi = static_cast<int>(v - e + f);
  if ((2 - info.chi) % 2 != 0)
    fail(ErrorCode::Topology, "Euler characteristic " + std::to_string(info.chi) + " gives odd 2 - chi");
  info.genus = (2 - info.chi) / 2;
  if (info.genus < 0) fail(ErrorCode::Topology, "negative genus: chi = " + std::to_string(info.chi));
  return info;
}

std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
  std::vector<std::vector<int>> nbrs(mesh.vertices.size());
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      nbrs[f[k]].push_back(f[(k + 1) % 3]);
      nbrs[f[k]].push_back(f[(k + 2) % 3]);
    }
  for (auto& n : nbrs) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return nbrs;
}

std::vector<std::vector<int>> vertex_faces(const TriMesh& mesh) {
  std::vector<std::vector<int>> vf(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    for (int i : mesh.faces[f]) vf[i].push_back(static_cast<int>(f));
  return vf;
}

std::uint64_t topology_fingerprint(const TriMesh& mesh) {
  // FNV-1a over vertex count and face indices.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(mesh.vertices.size());
  for (const auto& f : mesh.faces)
    for (int i : f) mix(static_cast<std::uint64_t>(i));
  return h;
}

// ---- geometry -------------------------------------------------------------

double face_area(const TriMesh& mesh, int f) {
  const auto& t = mesh.faces[f];
  return 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
}

Vec3 face_normal(const TriMesh& mesh, int f) {
  const auto& t = mesh.faces[f];
  Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
  double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

double surface_area(const TriMesh& mesh) {
  double a = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) a += face_area(mesh, static_cast<int>(f));
  return a;
}

double signed_volume(const TriMesh& mesh) {
  double v = 0.0;
  for (const auto& t : mesh.faces)
    v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  return v / 6.0;
}

Vec3 surface_centroid(const TriMesh& mesh) {
  Vec3 c = Vec3::Zero();
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    double a = face_area(mesh, static_cast<int>(f));
    c += a * (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    total += a;
  }
  if (total <= 0.0) {
    c.setZero();
    for (const auto& v : mesh.vertices) c += v;
    return mesh.vertices.empty() ? c : Vec3(c / static_cast<double>(mesh.vertices.size()));
  }
  return c / total;
}

void bounding_box(std::span<const Vec3> points, Vec3& lo, Vec3& hi) {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
}

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = rotation * v + translation;
  return out;
}

TriMesh scaled(const TriMesh& mesh, double s) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v *= s;
  return out;
}

// ---- processing -----------------------------------------------------------

TriMesh laplacian_smooth(const TriMesh& mesh, int iterations, double step) {
  require(iterations >= 0, ErrorCode::InvalidArgument, "smoothing iterations must be >= 0");
  require(step > 0.0 && step <= 1.0, ErrorCode::InvalidArgument, "smoothing step must be in (0, 1]");
  TriMesh out = mesh;
  if (iterations == 0) return out;
  const auto nbrs = vertex_neighbors(mesh);
  std::vector<Vec3> next(out.vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
      if (nbrs[i].empty()) {
        next[i] = out.vertices[i];
        continue;
      }
      Vec3 c = Vec3::Zero();
      for (int j : nbrs[i]) c += out.vertices[j];
      c /= static_cast<double>(nbrs[i].size());
      next[i] = out.vertices[i] + step * (c - out.vertices[i]);
    }
    out.vertices.swap(next);
  }
  return out;
}

CurvatureField mean_curvature(const TriMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<Vec3> lap(nv, Vec3::Zero());
  std::vector<double> area(nv, 0.0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const double a = face_area(mesh, static_cast<int>(f));
    double cot[3];
    bool obtuse = false;
    int obtuse_at = -1;
    for (int k = 0; k < 3; ++k) {
      const int i = t[k], j = t[(k + 1) % 3], o = t[(k + 2) % 3];
      // cotangent of the angle at o, opposite edge (i, j)
      const Vec3 u = mesh.vertices[i] - mesh.vertices[o];
      const Vec3 w = mesh.vertices[j] - mesh.vertices[o];
      const double cross = u.cross(w).norm();
      cot[k] = cross > 0.0 ? u.dot(w) / cross : 0.0;
      if (u.dot(w) < 0.0) {
        obtuse = true;
        obtuse_at = (k + 2) % 3;
      }
      lap[i] += 0.5 * cot[k] * (mesh.vertices[j] - mesh.vertices[i]);
      lap[j] += 0.5 * cot[k] * (mesh.vertices[i] - mesh.vertices[j]);
    }
    // Mixed Voronoi area (Meyer et al.); obtuse triangles fall back to a
    // half/quarter split of the face area.
    for (int k = 0; k < 3; ++k) {
      if (obtuse) {
        area[t[k]] += k == obtuse_at ? a / 2.0 : a / 4.0;
        continue;
      }
      const int i = t[k];
      const int j = t[(k + 1) % 3], l = t[(k + 2) % 3];
      // edge (i, j) is opposite the angle at l: cot[k]; edge (l, i) is
      // opposite the angle at j: cot[(k + 2) % 3]
      area[i] += ((mesh.vertices[j] - mesh.vertices[i]).squaredNorm() * cot[k] +
                  (mesh.vertices[l] - mesh.vertices[i]).squaredNorm() * cot[(k + 2) % 3]) /
                 8.0;
    }
  }
  CurvatureField out;
  out.values.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!(area[i] > 0.0))
      fail(ErrorCode::Numeric, "vertex " + std::to_string(i) + " has a zero-area ring");
    out.values[i] = (lap[i] / area[i]).norm() / 2.0;
  }
  return out;
}

}  // namespace surfnet
