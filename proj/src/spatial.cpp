#include "surfnet/spatial.hpp"

#include "surfnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace surfnet {

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               std::array<double, 3>* bary) {
  auto out = [&](double u, double v, double w) {
    if (bary) *bary = {u, v, w};
    return Vec3(u * a + v * b + w * c);
  };
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return out(1, 0, 0);
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return out(0, 1, 0);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return out(1 - v, v, 0);
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return out(0, 0, 1);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return out(1 - w, 0, w);
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return out(0, 1 - w, w);
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return out(1 - v - w, v, w);
}

// ---- ClosestPointTree -------------------------------------------------------

ClosestPointTree::ClosestPointTree(const TriMesh& mesh) : mesh_(&mesh) {
  require(!mesh.faces.empty(), ErrorCode::InvalidArgument, "closest-point tree needs a non-empty mesh");
  order_.resize(mesh.faces.size());
  std::iota(order_.begin(), order_.end(), 0);
  centroids_.resize(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    centroids_[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
  }
  nodes_.reserve(2 * mesh.faces.size() / 2 + 1);
  build(0, static_cast<int>(order_.size()));
}

int ClosestPointTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Node n;
  n.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  n.hi = -n.lo;
  for (int i = begin; i < end; ++i)
    for (int v : mesh_->faces[order_[i]]) {
      n.lo = n.lo.cwiseMin(mesh_->vertices[v]);
      n.hi = n.hi.cwiseMax(mesh_->vertices[v]);
    }
  n.begin = begin;
  n.end = end;
  if (end - begin > 4) {
    Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity()), chi = -clo;
    for (int i = begin; i < end; ++i) {
      clo = clo.cwiseMin(centroids_[order_[i]]);
      chi = chi.cwiseMax(centroids_[order_[i]]);
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return centroids_[a][axis] < centroids_[b][axis]; });
    n.left = build(begin, mid);
    n.right = build(mid, end);
  }
  nodes_[id] = n;
  return id;
}

double ClosestPointTree::box_distance2(const Node& n, const Vec3& p) {
  const Vec3 d = (n.lo - p).cwiseMax(Vec3::Zero()).cwiseMax(p - n.hi);
  return d.squaredNorm();
}

SurfacePoint ClosestPointTree::closest(const Vec3& p) const {
  SurfacePoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (box_distance2(n, p) >= best_d2) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int f = order_[i];
        const auto& t = mesh_->faces[f];
        std::array<double, 3> w;
        const Vec3 q = closest_point_on_triangle(p, mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]], &w);
        const double d2 = (q - p).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && f < best.face)) {
          best_d2 = d2;
          best.face = f;
          best.bary = w;
          best.point = q;
        }
      }
      continue;
    }
    const double dl = box_distance2(nodes_[n.left], p), dr = box_distance2(nodes_[n.right], p);
    // push farther first so the nearer child is popped first
    if (dl < dr) {
      stack[top++] = n.right;
      stack[top++] = n.left;
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

// ---- SphereLocator ----------------------------------------------------------

SphereLocator::SphereLocator(std::span<const Vec3> positions, std::span<const Face> faces)
    : pos_(positions.begin(), positions.end()), faces_(faces.begin(), faces.end()) {
  require(!faces_.empty(), ErrorCode::InvalidArgument, "sphere locator needs faces");
  res_ = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(faces_.size()) / 2.0)), 4, 64);
  buckets_.resize(static_cast<std::size_t>(res_) * res_ * res_);
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const auto& t = faces_[f];
    Vec3 lo = pos_[t[0]].cwiseMin(pos_[t[1]]).cwiseMin(pos_[t[2]]);
    Vec3 hi = pos_[t[0]].cwiseMax(pos_[t[1]]).cwiseMax(pos_[t[2]]);
    double edge = std::max({(pos_[t[0]] - pos_[t[1]]).norm(), (pos_[t[1]] - pos_[t[2]]).norm(),
                            (pos_[t[2]] - pos_[t[0]]).norm()});
    // The spherical triangle bulges past its chord by at most the sagitta.
    const double pad = std::min(2.0, edge * edge / 4.0 + edge * 0.05 + 1e-9);
    lo -= Vec3::Constant(pad);
    hi += Vec3::Constant(pad);
    int a[3], b[3];
    for (int d = 0; d < 3; ++d) {
      a[d] = std::clamp(static_cast<int>(std::floor((lo[d] + 1.0) * 0.5 * res_)), 0, res_ - 1);
      b[d] = std::clamp(static_cast<int>(std::floor((hi[d] + 1.0) * 0.5 * res_)), 0, res_ - 1);
    }
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i)
          buckets_[(static_cast<std::size_t>(k) * res_ + j) * res_ + i].push_back(static_cast<int>(f));
  }
}

std::size_t SphereLocator::bucket(const Vec3& p) const {
  int c[3];
  for (int d = 0; d < 3; ++d) c[d] = std::clamp(static_cast<int>(std::floor((p[d] + 1.0) * 0.5 * res_)), 0, res_ - 1);
  return (static_cast<std::size_t>(c[2]) * res_ + c[1]) * res_ + c[0];
}

bool SphereLocator::contains(int f, const Vec3& q, double tol) const {
  const auto& t = faces_[f];
  const Vec3 &a = pos_[t[0]], &b = pos_[t[1]], &c = pos_[t[2]];
  // Front hemisphere check rules out the antipodal triangle.
  if (q.dot(a + b + c) <= 0.0) return false;
  return q.dot(a.cross(b)) >= -tol && q.dot(b.cross(c)) >= -tol && q.dot(c.cross(a)) >= -tol;
}

SphereLocator::Hit SphereLocator::barycentric(int f, const Vec3& q) const {
  const auto& t = faces_[f];
  const Vec3 &a = pos_[t[0]], &b = pos_[t[1]], &c = pos_[t[2]];
  double w0 = std::max(0.0, q.dot(b.cross(c)));
  double w1 = std::max(0.0, q.dot(c.cross(a)));
  double w2 = std::max(0.0, q.dot(a.cross(b)));
  const double s = w0 + w1 + w2;
  Hit h;
  h.face = f;
  if (s > 0.0)
    h.bary = {w0 / s, w1 / s, w2 / s};
  else
    h.bary = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return h;
}

std::optional<SphereLocator::Hit> SphereLocator::locate(const Vec3& q_in) const {
  const double len = q_in.norm();
  if (!(len > 0.0)) return std::nullopt;
  const Vec3 q = q_in / len;
  const auto& cand = buckets_[bucket(q)];
  for (double tol : {0.0, 1e-12}) {
    for (int f : cand)
      if (contains(f, q, tol)) return barycentric(f, q);
  }
  for (std::size_t f = 0; f < faces_.size(); ++f)
    if (contains(static_cast<int>(f), q, 1e-10)) return barycentric(static_cast<int>(f), q);
  return std::nullopt;
}

}  // namespace surfnet
