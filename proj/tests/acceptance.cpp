// Acceptance run: one PASS/FAIL line per criterion. Optional arguments pick
// criteria by number; --work DIR sets the scratch directory.
#include "surfnet/correspondence.hpp"
#include "surfnet/dataset.hpp"
#include "surfnet/error.hpp"
#include "surfnet/geometry_image.hpp"
#include "surfnet/mesh.hpp"
#include "surfnet/models.hpp"
#include "surfnet/nn/layers.hpp"
#include "surfnet/nn/network.hpp"
#include "surfnet/nn/train.hpp"
#include "surfnet/shapes.hpp"
#include "surfnet/sphere_param.hpp"
#include "surfnet/voxel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace surfnet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- independent oracles --------------------------------------------------------

// Rz(az) then Rx(el), written out by hand.
Vec3 rotate_view(const Vec3& p, double az_deg, double el_deg) {
  const double a = az_deg * std::numbers::pi / 180.0, e = el_deg * std::numbers::pi / 180.0;
  const double x = std::cos(a) * p.x() - std::sin(a) * p.y();
  const double y = std::sin(a) * p.x() + std::cos(a) * p.y();
  const double z = p.z();
  return {x, std::cos(e) * y - std::sin(e) * z, std::sin(e) * y + std::cos(e) * z};
}

Vec3 pixel(const GeometryImage& g, int r, int c) {
  const int x = g.channel("x"), y = g.channel("y"), z = g.channel("z");
  return {g.at(r, c, x), g.at(r, c, y), g.at(r, c, z)};
}

// Mean over pixels of |a(r, c) - rotate(b(r, c))|.
double pixel_error(const GeometryImage& a, const GeometryImage& b, double az, double el) {
  double sum = 0.0;
  for (int r = 0; r < a.resolution; ++r)
    for (int c = 0; c < a.resolution; ++c) sum += (pixel(a, r, c) - rotate_view(pixel(b, r, c), az, el)).norm();
  return sum / static_cast<double>(a.pixels());
}

Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

// Brute force with a bounding-sphere cull.
struct SurfaceDistance {
  const TriMesh& mesh;
  std::vector<Vec3> centers;
  std::vector<double> radii;

  explicit SurfaceDistance(const TriMesh& m) : mesh(m) {
    for (const auto& f : m.faces) {
      const Vec3 c = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
      double r = 0.0;
      for (int k = 0; k < 3; ++k) r = std::max(r, (m.vertices[f[k]] - c).norm());
      centers.push_back(c);
      radii.push_back(r);
    }
  }
  double operator()(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
      if ((p - centers[i]).norm() - radii[i] >= best) continue;
      const auto& f = mesh.faces[i];
      best = std::min(best, (p - closest_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]])).norm());
    }
    return best;
  }
};

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  auto one_way = [](const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
    double s = 0.0;
    for (const Vec3& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& y : q) best = std::min(best, (x - y).squaredNorm());
      s += std::sqrt(best);
    }
    return s / static_cast<double>(p.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

struct TopologyCount {
  int chi = 0;
  bool closed_manifold = false;
};

// Every undirected edge in exactly two faces with opposite directions, every
// vertex fan a single cycle, chi = V - E + F over referenced vertices.
TopologyCount count_topology(const TriMesh& m) {
  std::map<std::pair<int, int>, int> directed;
  std::map<int, std::vector<std::pair<int, int>>> fans;
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) {
      ++directed[{f[k], f[(k + 1) % 3]}];
      fans[f[k]].push_back({f[(k + 1) % 3], f[(k + 2) % 3]});
    }
  bool ok = true;
  std::set<std::pair<int, int>> edges;
  for (const auto& [e, n] : directed) {
    ok = ok && n == 1 && directed.count({e.second, e.first}) == 1;
    edges.insert(std::minmax(e.first, e.second));
  }
  for (const auto& [v, fan] : fans) {
    std::map<int, int> next;
    for (const auto& [a, b] : fan) next[a] = b;
    if (next.size() != fan.size()) {
      ok = false;
      continue;
    }
    int cur = fan.front().first;
    std::size_t steps = 0;
    do {
      const auto it = next.find(cur);
      if (it == next.end()) break;
      cur = it->second;
      ++steps;
    } while (cur != fan.front().first && steps <= fan.size());
    ok = ok && cur == fan.front().first && steps == fan.size();
  }
  return {static_cast<int>(fans.size()) - static_cast<int>(edges.size()) + static_cast<int>(m.faces.size()), ok};
}

// Boundary quads of a set of unit cells, each split into two triangles.
TriMesh cell_surface(const std::set<std::array<int, 3>>& cells) {
  TriMesh m;
  std::map<std::array<int, 3>, int> index;
  auto vid = [&](int x, int y, int z) {
    const auto [it, fresh] = index.emplace(std::array{x, y, z}, static_cast<int>(m.vertices.size()));
    if (fresh) m.vertices.emplace_back(x, y, z);
    return it->second;
  };
  for (const auto& cell : cells)
    for (int axis = 0; axis < 3; ++axis)
      for (int dir : {-1, 1}) {
        auto nb = cell;
        nb[axis] += dir;
        if (cells.count(nb)) continue;
        const int u = (axis + 1) % 3, w = (axis + 2) % 3;
        std::array<int, 3> base = cell;
        if (dir > 0) base[axis] += 1;
        std::array<std::array<int, 3>, 4> q{base, base, base, base};
        q[1][u] += 1;
        q[2][u] += 1;
        q[2][w] += 1;
        q[3][w] += 1;
        int id[4];
        for (int k = 0; k < 4; ++k) id[k] = vid(q[k][0], q[k][1], q[k][2]);
        if (dir > 0) {
          m.faces.push_back({id[0], id[1], id[2]});
          m.faces.push_back({id[0], id[2], id[3]});
        } else {
          m.faces.push_back({id[0], id[2], id[1]});
          m.faces.push_back({id[0], id[3], id[2]});
        }
      }
  return m;
}

// Slab with `holes` square tunnels through it.
std::set<std::array<int, 3>> holed_slab(int holes) {
  std::set<std::array<int, 3>> cells;
  for (int x = 0; x < 4 + 4 * holes; ++x)
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 2; ++z) {
        const bool hole = y == 2 && x % 4 == 2 && x / 4 < holes;
        if (!hole) cells.insert({x, y, z});
      }
  return cells;
}

double chordal_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

double oracle_distortion(const TriMesh& m, const std::vector<Vec3>& sphere) {
  double am = 0.0, as = 0.0;
  std::vector<double> a, s;
  for (const auto& f : m.faces) {
    a.push_back(chordal_area(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]));
    s.push_back(chordal_area(sphere[f[0]], sphere[f[1]], sphere[f[2]]));
    am += a.back();
    as += s.back();
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] / am - s[i] / as);
  return d;
}

int oracle_flips(const TriMesh& m, const std::vector<Vec3>& sphere) {
  int n = 0;
  for (const auto& f : m.faces)
    if (sphere[f[0]].dot(sphere[f[1]].cross(sphere[f[2]])) <= 0.0) ++n;
  return n;
}

double oracle_smoothness(const GeometryImage& g) {
  double e = 0.0;
  for (int r = 0; r < g.resolution; ++r)
    for (int c = 0; c < g.resolution; ++c) {
      if (c + 1 < g.resolution) e += (pixel(g, r, c) - pixel(g, r, c + 1)).squaredNorm();
      if (r + 1 < g.resolution) e += (pixel(g, r, c) - pixel(g, r + 1, c)).squaredNorm();
    }
  return e;
}

double mesh_diagonal(const Family& fam) {
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (int id : fam.accepted())
    for (const Vec3& p : fam.shapes[id].mesh.vertices) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  return (hi - lo).norm();
}

// ---- gradient checks ------------------------------------------------------------

nn::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
  nn::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : t.data) v = u(rng);
  return t;
}

void randomize(std::vector<nn::Param*> ps, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (nn::Param* p : ps)
    for (auto& v : p->value.data) v = n(rng);
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i] + b[i] * b[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

// Central differences of <r, f(x)> against backward(r) for the input and
// every parameter tensor; worst per-tensor relative error.
double fd_check(const std::function<nn::Tensor(const nn::Tensor&)>& f,
                const std::function<nn::Tensor(const nn::Tensor&)>& b, std::vector<nn::Param*> params, nn::Tensor x,
                std::mt19937_64& rng, std::size_t max_entries) {
  const double h = 1e-6;
  const nn::Tensor r = random_tensor(f(x).shape, rng);
  for (nn::Param* p : params) p->grad.fill(0.0);
  f(x);
  const nn::Tensor dx = b(r);
  double worst = 0.0;
  auto check = [&](nn::Buffer& values, const nn::Buffer& analytic) {
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_entries);
    }
    std::vector<double> a, n;
    for (std::size_t i : idx) {
      const double keep = values[i];
      values[i] = keep + h;
      const double sp = nn::dot(r, f(x));
      values[i] = keep - h;
      const double sm = nn::dot(r, f(x));
      values[i] = keep;
      n.push_back((sp - sm) / (2 * h));
      a.push_back(analytic[i]);
    }
    worst = std::max(worst, rel_error(a, n));
  };
  check(x.data, dx.data);
  for (nn::Param* p : params) {
    const nn::Buffer g = p->grad.data;
    check(p->value.data, g);
  }
  return worst;
}

double module_fd(nn::Module& m, std::vector<int> in_shape, std::mt19937_64& rng) {
  std::vector<nn::Param*> ps;
  m.parameters(ps);
  randomize(ps, rng, 0.3);
  return fd_check([&](const nn::Tensor& x) { return m.forward(x); }, [&](const nn::Tensor& g) { return m.backward(g); },
                  ps, random_tensor(std::move(in_shape), rng), rng, 100000);
}

// ---- criteria -------------------------------------------------------------------

struct Context {
  fs::path work;
  std::optional<Family> dataset;
  std::optional<ParamModel> param_model;
  double diagonal = 0.0;
  std::vector<ViewAngles> views;
};

Outcome c1_round_trip(Context&) {
  const auto t0 = Clock::now();
  const TriMesh ico = shapes::icosphere(4);
  const SphericalParam p = parametrize_authalic(ico);
  const GeometryImage g = sample_geometry_image(ico, p, 64, position_fields(ico));
  const TriMesh d = decode_geometry_image(g);
  const double t = seconds_since(t0);
  double sum = 0.0;
  for (const Vec3& v : d.vertices) sum += std::abs(v.norm() - 1.0);
  const double mean = sum / static_cast<double>(d.vertices.size());
  return {g.resolution == 64 && g.channels() == 3 && mean < 1e-2 && t < 30.0,
          fmt("mean |r-1| = %.3e over %zu points, %.1f s", mean, d.vertices.size(), t)};
}

Outcome c2_authalic(Context&) {
  const TriMesh e = shapes::ellipsoid(3, 1, 1, 3);
  ParamReport rep;
  const SphericalParam p = parametrize_authalic(e, {}, &rep);
  const double init = oracle_distortion(e, centroid_projection(e).positions);
  const double fin = oracle_distortion(e, p.positions);
  const int flips = oracle_flips(e, p.positions);
  bool monotone = !rep.history.empty();
  for (std::size_t i = 1; i < rep.history.size(); ++i) monotone = monotone && rep.history[i] <= rep.history[i - 1];
  return {fin <= 0.5 * init && flips == 0 && monotone && std::abs(fin - rep.final_distortion) < 1e-9,
          fmt("distortion %.4f -> %.4f (ratio %.3f), flips %d, %d accepted steps, history %s", init, fin, fin / init, flips,
              rep.accepted, monotone ? "non-increasing" : "INCREASES")};
}

Outcome c3_topology(Context&) {
  std::vector<std::string> bad;
  // constructed meshes with known genus
  const std::vector<std::pair<TriMesh, int>> built = {{shapes::icosahedron(), 0},
                                                      {shapes::icosphere(3), 0},
                                                      {shapes::torus(8, 8, 2.0, 0.5), 1},
                                                      {shapes::torus(12, 20, 3.0, 1.0), 1},
                                                      {cell_surface(holed_slab(0)), 0},
                                                      {cell_surface(holed_slab(1)), 1},
                                                      {cell_surface(holed_slab(2)), 2},
                                                      {cell_surface(holed_slab(3)), 3}};
  for (std::size_t i = 0; i < built.size(); ++i) {
    const auto& [m, genus] = built[i];
    const TopologyCount t = count_topology(m);
    const EulerInfo e = euler_genus(m);
    if (!t.closed_manifold || t.chi != 2 - 2 * genus || e.chi != t.chi || e.genus != genus)
      bad.push_back(fmt("mesh %zu: chi %d genus %d, expected genus %d", i, e.chi, e.genus, genus));
  }
  auto extracted = [&](OccupancyGrid g, const std::string& what, int want_genus) {
    const TriMesh m = extract_surface(g);
    const TopologyCount t = count_topology(m);
    if (!t.closed_manifold) bad.push_back(what + ": not a closed manifold");
    if (want_genus >= 0 && t.chi != 2 - 2 * want_genus) bad.push_back(what + fmt(": chi %d", t.chi));
  };
  OccupancyGrid ball(25, 25, 25, Vec3::Zero(), 1.0), torus(28, 28, 28, Vec3::Zero(), 1.0);
  for (int k = 0; k < 25; ++k)
    for (int j = 0; j < 25; ++j)
      for (int i = 0; i < 25; ++i)
        if (Vec3(i - 12, j - 12, k - 12).norm() <= 10.0) ball.set(i, j, k);
  for (int k = 0; k < 28; ++k)
    for (int j = 0; j < 28; ++j)
      for (int i = 0; i < 28; ++i) {
        const double q = std::hypot(i - 13.5, j - 13.5) - 8.0, z = k - 13.5;
        if (q * q + z * z <= 9.0) torus.set(i, j, k);
      }
  extracted(ball, "solid ball", 0);
  extracted(torus, "solid torus", 1);
  int grids = 0;
  for (std::uint32_t seed = 1; seed <= 60; ++seed) {
    std::mt19937 rng(seed);
    std::bernoulli_distribution on(0.4 + 0.005 * (seed % 30));
    OccupancyGrid g(9, 9, 9, Vec3::Zero(), 1.0);
    for (int k = 1; k < 8; ++k)
      for (int j = 1; j < 8; ++j)
        for (int i = 1; i < 8; ++i)
          if (on(rng)) g.set(i, j, k);
    if (g.occupied() == 0) continue;
    ++grids;
    extracted(g, fmt("random grid %u", seed), -1);
  }
  return {bad.empty(), bad.empty() ? fmt("%zu constructed meshes, ball genus 0, torus genus 1, %d random grids closed",
                                         built.size(), grids)
                                   : bad.front()};
}

Outcome c4_gradients(Context&) {
  std::mt19937_64 rng(4);
  std::vector<std::pair<std::string, double>> errs;
  for (auto [k, s, p] : {std::array{3, 1, 1}, std::array{3, 2, 1}, std::array{1, 2, 0}, std::array{1, 1, 0}}) {
    nn::Conv2d c("conv", 3, 4, k, s, p);
    errs.push_back({fmt("conv%dx%d/s%d", k, k, s), module_fd(c, {3, 8, 8}, rng)});
  }
  nn::ConvTranspose2d t("convT", 4, 3, 2);
  errs.push_back({"convT", module_fd(t, {4, 6, 6}, rng)});
  nn::Linear l("fc", 7, 5);
  errs.push_back({"linear", module_fd(l, {7}, rng)});
  for (double leak : {0.0, 0.2}) {
    nn::LeakyReLU a("act", leak);
    errs.push_back({fmt("leaky%.1f", leak), module_fd(a, {2, 5, 5}, rng)});
  }
  nn::Reshape r("reshape", {2, 3, 4});
  errs.push_back({"reshape", module_fd(r, {24}, rng)});
  auto sb = nn::standard_block("std", 4, 0.2, rng);
  errs.push_back({"standard block", module_fd(*sb, {4, 8, 8}, rng)});
  auto db = nn::down_block("down", 4, 6, 0.0, rng);
  errs.push_back({"down block", module_fd(*db, {4, 8, 8}, rng)});
  auto ub = nn::up_block("up", 4, 3, 0.2, rng);
  errs.push_back({"up block", module_fd(*ub, {4, 8, 8}, rng)});
  double worst_layer = 0.0;
  std::string worst_name;
  for (const auto& [n, e] : errs)
    if (e >= worst_layer) {
      worst_layer = e;
      worst_name = n;
    }

  nn::NetworkSpec spec = nn::image_to_gim_spec("x", 16, 8);
  spec.bottleneck = 4;
  spec.base_width = 2;
  spec.max_width = 4;
  spec.standard_per_group = 1;
  spec.seed = 3;
  nn::Network net(spec);
  for (nn::Param* p : net.parameters())
    for (auto& v : p->value.data) v += std::normal_distribution<double>(0.0, 0.1)(rng);
  const double e2e = fd_check([&](const nn::Tensor& x) { return net.forward(x); },
                              [&](const nn::Tensor& g) { return net.backward(g); }, net.parameters(),
                              random_tensor({1, 16, 16}, rng), rng, 40);

  const nn::Tensor u({1, 2, 2}, std::vector<double>{1, 0, 0, 0});
  const nn::Tensor g({1, 2, 2}, 0.0);
  const nn::Tensor c({1, 2, 2}, std::vector<double>{2, 1, 1, 1});
  const nn::LossResult loss = nn::curvature_weighted_loss(u, g, c);
  const bool exact = loss.value == 4.0 && loss.grad.data == nn::Buffer{8, 0, 0, 0};
  return {worst_layer < 1e-6 && e2e < 1e-4 && exact,
          fmt("%zu layer/block checks, worst %.2e (%s); network %.2e; 2x2 loss %g grad [%g %g %g %g]", errs.size(),
              worst_layer, worst_name.c_str(), e2e, loss.value, loss.grad[0], loss.grad[1], loss.grad[2], loss.grad[3])};
}

Outcome c5_clustering(Context&) {
  auto families = [](std::vector<int>* labels) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> jit(-0.05, 0.05);
    std::vector<TriMesh> out;
    for (int i = 0; i < 9; ++i) {
      out.push_back(shapes::icosphere(3, 1.0 + jit(rng)));
      labels->push_back(0);
      out.push_back(shapes::box(1.0 + jit(rng), 1.0 + jit(rng), 1.0 + jit(rng), 4));
      labels->push_back(1);
      out.push_back(shapes::superellipsoid({1.0, 1.0, 0.3 + 0.5 * jit(rng), 0.3 + 0.5 * jit(rng), 2.0 + jit(rng)}, 3));
      labels->push_back(2);
    }
    return out;
  };
  std::vector<int> truth;
  const auto meshes = families(&truth);
  auto run = [&] {
    std::vector<D2Descriptor> d;
    for (std::size_t i = 0; i < meshes.size(); ++i) d.push_back(d2_descriptor(meshes[i], {}, 100 + i));
    return spectral_cluster(similarity_matrix(d), 3, 5);
  };
  const ClusterResult res = run();
  int correct = 0;
  std::map<int, int> size;
  for (int c = 0; c < 3; ++c) {
    std::map<int, int> counts;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (res.assignments[i] == c) {
        ++counts[truth[i]];
        ++size[c];
      }
    int best = 0;
    for (const auto& [_, n] : counts) best = std::max(best, n);
    correct += best;
  }
  const double purity = static_cast<double>(correct) / truth.size();
  int largest = 0;
  for (const auto& [c, n] : size) largest = std::max(largest, n);
  bool base_ok = res.base >= 0 && res.base < static_cast<int>(truth.size()) &&
                 std::find(res.exemplars.begin(), res.exemplars.end(), res.base) != res.exemplars.end() &&
                 size[res.assignments[res.base]] == largest;
  int same = 0;
  for (int k = 0; k < 5; ++k) {
    const ClusterResult again = run();
    same += again.assignments == res.assignments && again.base == res.base && again.exemplars == res.exemplars;
  }
  return {purity == 1.0 && base_ok && same == 5,
          fmt("purity %.3f, base %d in a largest cluster (%d shapes): %s, %d/5 reruns identical", purity, res.base, largest,
              base_ok ? "yes" : "no", same)};
}

Outcome c6_consistency(Context& ctx) {
  const auto t0 = Clock::now();
  const Family fam = build_family(FamilySpec{}, 1);
  const fs::path dir = ctx.work / "dataset";
  fs::remove_all(dir);
  write_dataset(fam, dir);
  const double build = seconds_since(t0);
  std::ifstream in(dir / "manifest.json");
  const json manifest = json::parse(in);
  int accepted = 0, violations = 0;
  double worst = 0.0;
  for (const auto& s : manifest.at("samples")) {
    if (!s.at("accepted").get<bool>()) continue;
    ++accepted;
    const TriMesh m = load_obj(dir / s.at("obj").get<std::string>());
    const GeometryImage g = load_gim(dir / s.at("gim").get<std::string>());
    const SurfaceDistance dist(m);
    double sum = 0.0;
    for (int r = 0; r < g.resolution; ++r)
      for (int c = 0; c < g.resolution; ++c) sum += dist(pixel(g, r, c));
    const double err = sum / static_cast<double>(g.pixels());
    worst = std::max(worst, err);
    if (!(err <= s.at("threshold").get<double>())) ++violations;
  }
  ctx.dataset = load_dataset(dir);
  ctx.diagonal = mesh_diagonal(*ctx.dataset);
  return {accepted > 0 && violations == 0,
          fmt("%d/%zu accepted, worst recomputed error %.2e <= %.3g, %d violations (build %.0f s)", accepted,
              manifest.at("samples").size(), worst, fam.spec.threshold, violations, build)};
}

bool need_dataset(Context& ctx) {
  if (!ctx.dataset) c6_consistency(ctx);
  return ctx.dataset.has_value();
}

Outcome c7_training(Context& ctx) {
  need_dataset(ctx);
  const Family& fam = *ctx.dataset;
  ctx.views = azimuth_ring(8, 15.0);
  ParamTrainOptions o;
  o.spec_template = nn::param_to_residual_gim_spec("x", 1, 32);
  o.config.batch_size = 2;
  o.views = ctx.views;
  ChannelCurves cc;
  const auto t0 = Clock::now();
  ctx.param_model = train_param_model(fam, o, &cc);
  const double minutes = seconds_since(t0) / 60.0;
  bool decreasing = true;
  std::string curves;
  for (int ch = 0; ch < 3; ++ch) {
    const auto& cv = cc.curves[ch];
    decreasing = decreasing && cv.size() >= 5;
    for (std::size_t e = 1; e < 5 && e < cv.size(); ++e) decreasing = decreasing && cv[e].mean_loss < cv[e - 1].mean_loss;
    curves += fmt(" %c:%.3g->%.3g", "xyz"[ch], cv.front().mean_loss, cv.size() >= 5 ? cv[4].mean_loss : 0.0);
  }
  double err = 0.0, base = 0.0;
  int n = 0;
  for (int id : fam.accepted()) {
    const GeometryImage target = shape_gim(fam, id, 32);
    for (const auto& v : ctx.views) {
      const ParamVector pv = ParamVector::one_hot(id, ctx.param_model->classes, v.azimuth, v.elevation);
      err += pixel_error(generate_gim(*ctx.param_model, pv), target, v.azimuth, v.elevation);
      base += pixel_error(generate_gim(*ctx.param_model, pv, true), target, v.azimuth, v.elevation);
      ++n;
    }
  }
  const double rel = err / n / ctx.diagonal, base_rel = base / n / ctx.diagonal;
  return {decreasing && rel < 0.05 && minutes < 30.0,
          fmt("epochs 1-5%s %s; error %.2f%% of diagonal (zero residual %.2f%%), %d samples, %.1f min", curves.c_str(),
              decreasing ? "strictly decreasing" : "NOT decreasing", 100 * rel, 100 * base_rel, n, minutes)};
}

bool need_model(Context& ctx) {
  if (!ctx.param_model) c7_training(ctx);
  return ctx.param_model.has_value();
}

Outcome c8_identity(Context& ctx) {
  need_model(ctx);
  ParamModel& model = *ctx.param_model;
  const Family& fam = *ctx.dataset;
  const GeometryImage base = base_positions(fam, model.base.resolution);
  double worst_bits = 0.0, worst_hand = 0.0;
  for (double az : {0.0, 22.5, 45.0, 137.0})
    for (double el : {0.0, 20.0}) {
      const GeometryImage z = generate_gim(model, ParamVector::one_hot(0, model.classes, az, el), true);
      const GeometryImage rot = rotate_positions(base, view_rotation(az, el));
      for (int r = 0; r < z.resolution; ++r)
        for (int c = 0; c < z.resolution; ++c) {
          worst_bits = std::max(worst_bits, (pixel(z, r, c) - pixel(rot, r, c)).cwiseAbs().maxCoeff());
          worst_hand = std::max(worst_hand, (pixel(z, r, c) - rotate_view(pixel(base, r, c), az, el)).norm());
        }
    }
  const TriMesh zm = decode_geometry_image(generate_gim(model, ParamVector::one_hot(0, model.classes, 30.0, 0.0), true));
  const TriMesh bm = decode_geometry_image(rotate_positions(base, view_rotation(30.0, 0.0)));
  const bool same_surface = zm.faces == bm.faces && zm.vertices == bm.vertices;

  // training box from the rotated meshes, independent of the model's record
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (int id : fam.accepted())
    for (const auto& v : ctx.views)
      for (const Vec3& p : fam.shapes[id].mesh.vertices) {
        const Vec3 q = rotate_view(p, v.azimuth, v.elevation);
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
      }
  const Vec3 mid = 0.5 * (lo + hi), half = 0.625 * (hi - lo);
  bool all_ok = true;
  int checked = 0;
  for (int cls : fam.accepted()) {
    const TriMesh m = decode_geometry_image(generate_gim(model, ParamVector::one_hot(cls, model.classes, 22.5, 0.0)));
    const TopologyCount t = count_topology(m);
    bool finite = true, inside = true;
    for (const Vec3& p : m.vertices) {
      finite = finite && p.allFinite();
      inside = inside && ((p - mid).cwiseAbs().array() <= half.array()).all();
    }
    all_ok = all_ok && finite && inside && t.closed_manifold && t.chi == 2;
    ++checked;
  }
  return {worst_bits == 0.0 && worst_hand < 1e-12 && same_surface && all_ok,
          fmt("zero residual vs rotated base: max diff %g (hand rotation %.1e), decoded surfaces %s; az 22.5: %d classes "
              "closed, finite, inside 1.25x box: %s",
              worst_bits, worst_hand, same_surface ? "identical" : "differ", checked, all_ok ? "yes" : "no")};
}

Outcome c9_curvature(Context&) {
  FamilySpec spec;
  spec.eps1 = {0.25, 0.35};
  spec.eps2 = {0.25, 0.35};
  spec.gim_res = 32;
  spec.views = {};
  const Family fam = build_family(spec, 1);
  const auto views = azimuth_ring(8, 15.0);
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    double top[2] = {0, 0};
    for (int weighted = 0; weighted < 2; ++weighted) {
      ParamTrainOptions o;
      o.spec_template = nn::param_to_residual_gim_spec("x", 1, 32);
      o.spec_template.seed = seed;
      o.config.seed = seed;
      o.config.batch_size = 2;
      o.config.curvature_weighted = weighted == 1;
      o.views = views;
      ParamModel m = train_param_model(fam, o);
      double sum = 0.0;
      long count = 0;
      for (int id : fam.accepted()) {
        const GeometryImage& g = fam.shapes[id].gim;
        const int cc = g.channel("curvature");
        std::vector<double> mag;
        for (int r = 0; r < g.resolution; ++r)
          for (int c = 0; c < g.resolution; ++c) mag.push_back(std::abs(g.at(r, c, cc)));
        std::vector<double> sorted = mag;
        std::sort(sorted.begin(), sorted.end());
        const double cut = sorted[sorted.size() * 9 / 10];
        for (const auto& v : views) {
          const GeometryImage p = generate_gim(m, ParamVector::one_hot(id, m.classes, v.azimuth, v.elevation));
          for (int r = 0; r < g.resolution; ++r)
            for (int c = 0; c < g.resolution; ++c)
              if (mag[r * g.resolution + c] >= cut) {
                sum += (pixel(p, r, c) - rotate_view(pixel(g, r, c), v.azimuth, v.elevation)).norm();
                ++count;
              }
        }
      }
      top[weighted] = sum / count;
    }
    const bool win = top[1] <= 0.9 * top[0];
    wins += win;
    detail += fmt(" seed %d: %.4f vs %.4f (%.2f)%s", static_cast<int>(seed), top[1], top[0], top[1] / top[0],
                  seed < 2 ? ";" : "");
  }
  return {wins >= 2, fmt("%zu shapes, weighted vs plain top-decile error:%s; %d/3 pass", fam.accepted().size(),
                         detail.c_str(), wins)};
}

Outcome c10_interpolation(Context& ctx) {
  need_model(ctx);
  ParamModel& model = *ctx.param_model;
  const Family& fam = *ctx.dataset;
  const auto acc = fam.accepted();
  const int a = acc.front(), b = acc.back();
  const auto gims = interpolate_params(model, ParamVector::one_hot(a, model.classes, 0.0, 0.0),
                                       ParamVector::one_hot(b, model.classes, 0.0, 0.0), 5);
  const double ea = pixel_error(gims.front(), shape_gim(fam, a, model.base.resolution), 0.0, 0.0) / ctx.diagonal;
  const double eb = pixel_error(gims.back(), shape_gim(fam, b, model.base.resolution), 0.0, 0.0) / ctx.diagonal;
  bool decodable = gims.size() == 5;
  for (std::size_t i = 1; i + 1 < gims.size(); ++i) {
    const TriMesh m = decode_geometry_image(gims[i]);
    const TopologyCount t = count_topology(m);
    bool finite = true;
    for (const Vec3& p : m.vertices) finite = finite && p.allFinite();
    decodable = decodable && finite && t.closed_manifold && t.chi == 2;
  }
  std::vector<std::vector<Vec3>> clouds;
  for (const auto& g : gims) {
    clouds.emplace_back();
    for (int r = 0; r < g.resolution; ++r)
      for (int c = 0; c < g.resolution; ++c) clouds.back().push_back(pixel(g, r, c));
  }
  const double end = brute_chamfer(clouds.front(), clouds.back());
  double worst = 0.0;
  std::string steps;
  for (std::size_t i = 1; i < clouds.size(); ++i) {
    const double d = brute_chamfer(clouds[i - 1], clouds[i]);
    worst = std::max(worst, d);
    steps += fmt(" %.4f", d);
  }
  return {ea < 0.05 && eb < 0.05 && decodable && worst < 2.0 * end / 4.0,
          fmt("shapes %d->%d: endpoint errors %.2f%%, %.2f%% of diagonal; intermediates %s; steps%s vs limit %.4f", a, b,
              100 * ea, 100 * eb, decodable ? "closed and finite" : "NOT decodable", steps.c_str(), end / 2.0)};
}

Outcome c11_rectification(Context& ctx) {
  need_dataset(ctx);
  const Family& fam = *ctx.dataset;
  ImageTrainOptions o;
  o.spec_template = nn::image_to_gim_spec("x", 64, 32, 1);
  o.config.batch_size = 2;
  // Every pixel feeds the map, so flat faces need as much accuracy as creases.
  o.config.curvature_weighted = false;
  // 0 to 75 degrees: square-section members repeat every quarter turn, so a
  // wider ring pairs identical depth images with different targets.
  o.views = azimuth_ring(11, 7.5);
  const auto t0 = Clock::now();
  ImageModel model = train_image_model(fam, o);
  const double train_min = seconds_since(t0) / 60.0;
  const auto acc = fam.accepted();
  const int shape = acc.front() == fam.base_index ? acc[1] : acc.front();
  const TriMesh& m = fam.shapes[shape].mesh;
  const DenseCorrespondence noisy = perturb_correspondence(shared_connectivity_map(fam.base.mesh, m), m, 0.02, 7);
  const double before = oracle_smoothness(consistent_geometry_image(m, fam.base, noisy, 32));
  bool ok = true;
  std::string detail;
  for (double az : {15.0, 60.0}) {
    const Rectification rect = rectify_correspondence(m, fam.base, model, az, 0.0, 64);
    const double after = oracle_smoothness(consistent_geometry_image(m, fam.base, rect.map, 32));
    ok = ok && !rect.low_confidence && after <= 0.75 * before;
    detail += fmt(" az %g: %.4g -> %.4g (-%.0f%%)", az, before, after, 100 * (1 - after / before));
  }
  return {ok, fmt("shape %d, noise 0.02 diagonal;%s; image model %.1f min", shape, detail.c_str(), train_min)};
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.work = fs::temp_directory_path() / "surfnet_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc)
      ctx.work = argv[++i];
    else
      only.insert(std::stoi(a));
  }
  fs::create_directories(ctx.work);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria = {
      {"geometry image round trip", c1_round_trip},
      {"authalic improvement", c2_authalic},
      {"topology oracles", c3_topology},
      {"gradient correctness", c4_gradients},
      {"clustering", c5_clustering},
      {"consistency guarantee", c6_consistency},
      {"desk-scale training", c7_training},
      {"residual identity", c8_identity},
      {"curvature weighting", c9_curvature},
      {"interpolation", c10_interpolation},
      {"rectification", c11_rectification}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
