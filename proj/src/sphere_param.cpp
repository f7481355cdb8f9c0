#include "surfnet/sphere_param.hpp"

#include "surfnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace surfnet {

namespace {

double sgn(double x) { return x >= 0.0 ? 1.0 : -1.0; }

std::vector<double> normalized_mesh_areas(const TriMesh& mesh) {
  std::vector<double> a(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) total += a[f] = face_area(mesh, static_cast<int>(f));
  require(total > 0.0, ErrorCode::Numeric, "mesh has zero surface area");
  for (auto& x : a) x /= total;
  return a;
}

double chordal_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

// Spherical umbrella smoothing until no face is inverted.
int untangle(const TriMesh& mesh, std::vector<Vec3>& p, int max_passes) {
  if (count_flipped(mesh, p) == 0) return 0;
  const auto nbrs = vertex_neighbors(mesh);
  std::vector<Vec3> next(p.size());
  for (int pass = 1; pass <= max_passes; ++pass) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      Vec3 c = Vec3::Zero();
      for (int j : nbrs[i]) c += p[j];
      const Vec3 blended = 0.5 * p[i] + 0.5 * c / std::max<std::size_t>(1, nbrs[i].size());
      next[i] = blended.norm() > 1e-12 ? Vec3(blended.normalized()) : p[i];
    }
    p.swap(next);
    if (count_flipped(mesh, p) == 0) return pass;
  }
  fail(ErrorCode::Numeric, "spherical parametrization: could not recover a bijective initial map");
}

}  // namespace

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  // Van Oosterom-Strackee solid angle.
  const double num = a.dot(b.cross(c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

int count_flipped(const TriMesh& mesh, std::span<const Vec3> sphere) {
  int flipped = 0;
  for (const auto& t : mesh.faces) {
    const Vec3 &a = sphere[t[0]], &b = sphere[t[1]], &c = sphere[t[2]];
    if (!(a.dot(b.cross(c)) > 0.0) || !(spherical_triangle_area(a, b, c) > 0.0)) ++flipped;
  }
  return flipped;
}

double area_distortion(const TriMesh& mesh, std::span<const Vec3> sphere) {
  require(sphere.size() == mesh.vertices.size(), ErrorCode::InvalidArgument,
          "parametrization does not match mesh vertex count");
  const auto a = normalized_mesh_areas(mesh);
  std::vector<double> s(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < s.size(); ++f) {
    const auto& t = mesh.faces[f];
    total += s[f] = chordal_area(sphere[t[0]], sphere[t[1]], sphere[t[2]]);
  }
  if (!(total > 0.0)) return 2.0;
  double d = 0.0;
  for (std::size_t f = 0; f < s.size(); ++f) d += std::abs(a[f] - s[f] / total);
  return d;
}

SphericalParam centroid_projection(const TriMesh& mesh) {
  SphericalParam p;
  p.mesh_fingerprint = topology_fingerprint(mesh);
  const Vec3 c = surface_centroid(mesh);
  p.positions.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) {
    const Vec3 d = v - c;
    require(d.norm() > 0.0, ErrorCode::Numeric, "vertex coincides with the mesh centroid");
    p.positions.push_back(d.normalized());
  }
  return p;
}

SphericalParam parametrize_authalic(const TriMesh& mesh, const ParamOptions& opt, ParamReport* report) {
  const EulerInfo info = euler_genus(mesh);
  if (info.genus != 0)
    fail(ErrorCode::Topology, "spherical parametrization needs genus 0, mesh has genus " + std::to_string(info.genus));
  require(opt.max_iters >= 0, ErrorCode::InvalidArgument, "max_iters must be >= 0");

  ParamReport rep;
  SphericalParam param = centroid_projection(mesh);
  auto& p = param.positions;
  rep.repair_passes = untangle(mesh, p, opt.repair_iters);

  const auto target = normalized_mesh_areas(mesh);
  const std::size_t nv = p.size(), nf = mesh.faces.size();
  double current = area_distortion(mesh, p);
  rep.initial_distortion = current;
  rep.history.push_back(current);

  std::vector<Vec3> grad(nv), trial(nv);
  std::vector<double> hess(nv);
  double step = 1.0;
  for (int it = 0; it < opt.max_iters && current > 0.0; ++it) {
    rep.iterations = it + 1;
    double total = 0.0;
    for (const auto& t : mesh.faces) total += chordal_area(p[t[0]], p[t[1]], p[t[2]]);
    std::fill(grad.begin(), grad.end(), Vec3::Zero());
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& t = mesh.faces[f];
      const Vec3 cr = (p[t[1]] - p[t[0]]).cross(p[t[2]] - p[t[0]]);
      const double area = 0.5 * cr.norm();
      if (!(area > 0.0)) continue;
      const Vec3 n = cr.normalized();
      const double log_ratio = std::log((area / total) / target[f]);
      for (int k = 0; k < 3; ++k) {
        const Vec3 d_area = 0.5 * n.cross(p[t[(k + 2) % 3]] - p[t[(k + 1) % 3]]);
        grad[t[k]] += (2.0 * target[f] * log_ratio / area) * d_area;
        hess[t[k]] += 2.0 * target[f] * d_area.squaredNorm() / (area * area);
      }
    }
    for (std::size_t i = 0; i < nv; ++i) {
      const Vec3 g = grad[i] - grad[i].dot(p[i]) * p[i];
      const Vec3 d = hess[i] > 0.0 ? Vec3(-g / hess[i]) : Vec3::Zero();
      trial[i] = (p[i] + step * d).normalized();
    }
    const bool flipped = count_flipped(mesh, trial) > 0;
    const double next = flipped ? current : area_distortion(mesh, trial);
    if (flipped || next > current) {
      step *= 0.5;
      if (step < 1e-10) break;
      continue;
    }
    const double change = (current - next) / current;
    p.swap(trial);
    current = next;
    ++rep.accepted;
    rep.history.push_back(current);
    step = std::min(1.0, step * 1.5);
    if (change < opt.tol) break;
  }
  rep.final_distortion = current;
  if (report) *report = std::move(rep);
  return param;
}

std::array<double, 2> octahedral_unfold(const Vec3& p) {
  const double l1 = std::abs(p.x()) + std::abs(p.y()) + std::abs(p.z());
  double x = p.x() / l1, y = p.y() / l1;
  double a = x, b = y;
  if (p.z() < 0.0) {
    a = sgn(x) * (1.0 - std::abs(y));
    b = sgn(y) * (1.0 - std::abs(x));
  }
  return {(a + 1.0) * 0.5, (b + 1.0) * 0.5};
}

Vec3 octahedral_fold(double u, double v) {
  const double a = 2.0 * u - 1.0, b = 2.0 * v - 1.0;
  Vec3 p(a, b, 1.0 - std::abs(a) - std::abs(b));
  if (p.z() < 0.0) {
    const double x = sgn(a) * (1.0 - std::abs(b));
    const double y = sgn(b) * (1.0 - std::abs(a));
    p.x() = x;
    p.y() = y;
  }
  return p.normalized();
}

}  // namespace surfnet
