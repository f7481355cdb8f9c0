#include "surfnet/correspondence.hpp"

#include "surfnet/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace surfnet {

namespace {

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double t = golden * i;
    pts.emplace_back(r * std::cos(t), r * std::sin(t), z);
  }
  return pts;
}

Vec3 interpolate(const std::vector<Vec3>& values, const Face& f, const std::array<double, 3>& w) {
  return w[0] * values[f[0]] + w[1] * values[f[1]] + w[2] * values[f[2]];
}

Vec3 surface_point(const TriMesh& mesh, const SphereLocator& loc, const Vec3& q) {
  const auto hit = loc.locate(q);
  if (!hit) fail(ErrorCode::Numeric, "sphere point location failed; parametrization is not bijective");
  return interpolate(mesh.vertices, mesh.faces[hit->face], hit->bary);
}

}  // namespace

// ---- D2 -----------------------------------------------------------------------

std::vector<Vec3> sample_surface(const TriMesh& mesh, int count, std::uint64_t seed) {
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < cdf.size(); ++f) cdf[f] = total += face_area(mesh, static_cast<int>(f));
  require(total > 0.0, ErrorCode::Numeric, "cannot sample a mesh with zero surface area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double x = u(rng) * total;
    const auto f = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin());
    const auto& t = mesh.faces[std::min(f, cdf.size() - 1)];
    double r1 = std::sqrt(u(rng)), r2 = u(rng);
    pts.push_back((1 - r1) * mesh.vertices[t[0]] + r1 * (1 - r2) * mesh.vertices[t[1]] + r1 * r2 * mesh.vertices[t[2]]);
  }
  return pts;
}

D2Descriptor d2_descriptor(const TriMesh& mesh, const D2Options& opt, std::uint64_t seed) {
  require(opt.samples >= 1000, ErrorCode::InvalidArgument, "D2 needs at least 1000 samples");
  require(opt.bins >= 16, ErrorCode::InvalidArgument, "D2 needs at least 16 bins");
  require(opt.max_ratio > 0.0, ErrorCode::InvalidArgument, "D2 max_ratio must be positive");
  const auto pts = sample_surface(mesh, opt.samples, seed);
  const std::size_t n = pts.size();
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      dist.push_back((pts[i] - pts[j]).norm());
      sum += dist.back();
    }
  D2Descriptor d;
  d.normalization = sum / static_cast<double>(dist.size());
  require(d.normalization > 0.0, ErrorCode::Numeric, "all D2 samples coincide");
  d.histogram.assign(opt.bins, 0.0);
  const double scale = opt.bins / (opt.max_ratio * d.normalization);
  for (double x : dist) d.histogram[std::min(opt.bins - 1, static_cast<int>(x * scale))] += 1.0;
  for (auto& h : d.histogram) h /= static_cast<double>(dist.size());
  return d;
}

double d2_distance(const D2Descriptor& a, const D2Descriptor& b) {
  require(a.histogram.size() == b.histogram.size(), ErrorCode::InvalidArgument, "D2 bin counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.histogram.size(); ++i) s += std::abs(a.histogram[i] - b.histogram[i]);
  return s;
}

Eigen::MatrixXd similarity_matrix(const std::vector<D2Descriptor>& desc) {
  const int n = static_cast<int>(desc.size());
  require(n >= 2, ErrorCode::InvalidArgument, "similarity needs at least 2 descriptors");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> off;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = d2_distance(desc[i], desc[j]);
      off.push_back(d(i, j));
    }
  std::sort(off.begin(), off.end());
  const std::size_t m = off.size();
  double sigma = m % 2 ? off[m / 2] : 0.5 * (off[m / 2 - 1] + off[m / 2]);
  if (!(sigma > 0.0)) {
    // More than half the pairs coincide: fall back to the mean nonzero distance.
    double s = 0.0;
    int c = 0;
    for (double x : off)
      if (x > 0.0) s += x, ++c;
    sigma = c ? s / c : 1.0;
  }
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = i == j ? 1.0 : std::exp(-d(i, j) / sigma);
  return s;
}

// ---- clustering -------------------------------------------------------------

ClusterResult spectral_cluster(const Eigen::MatrixXd& s, int k, std::uint64_t seed) {
  const int n = static_cast<int>(s.rows());
  require(s.rows() == s.cols(), ErrorCode::InvalidArgument, "similarity matrix must be square");
  require(k >= 1 && k <= n, ErrorCode::InvalidArgument, "cluster count must be in [1, shape count]");

  Eigen::VectorXd dinv(n);
  for (int i = 0; i < n; ++i) {
    const double deg = s.row(i).sum();
    require(deg > 0.0, ErrorCode::Numeric, "shape " + std::to_string(i) + " has zero similarity degree");
    dinv(i) = 1.0 / std::sqrt(deg);
  }
  const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) - dinv.asDiagonal() * s * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
  if (eig.info() != Eigen::Success) fail(ErrorCode::Numeric, "eigen-decomposition of the shape Laplacian failed");
  Eigen::MatrixXd emb = eig.eigenvectors().leftCols(k);
  for (int i = 0; i < n; ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0.0) emb.row(i) /= norm;
  }

  // k-means, k-means++ seeding, 50 restarts, lowest inertia wins.
  std::vector<int> best_assign(n, 0);
  double best_inertia = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  for (int restart = 0; restart < 50; ++restart) {
    Eigen::MatrixXd centers(k, k);
    std::uniform_int_distribution<int> pick(0, n - 1);
    centers.row(0) = emb.row(pick(rng));
    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) m = std::min(m, (emb.row(i) - centers.row(j)).squaredNorm());
        total += d2[i] = m;
      }
      int chosen = n - 1;
      if (total > 0.0) {
        double x = std::uniform_real_distribution<double>(0.0, total)(rng);
        for (int i = 0; i < n; ++i) {
          x -= d2[i];
          if (x <= 0.0) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = pick(rng);
      }
      centers.row(c) = emb.row(chosen);
    }
    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double m = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double dist = (emb.row(i) - centers.row(c)).squaredNorm();
          if (dist < m) m = dist, arg = c;
        }
        if (assign[i] != arg) assign[i] = arg, changed = true;
      }
      if (!changed) break;
      for (int c = 0; c < k; ++c) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(k);
        int count = 0;
        for (int i = 0; i < n; ++i)
          if (assign[i] == c) sum += emb.row(i), ++count;
        if (count) centers.row(c) = sum / count;
      }
    }
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += (emb.row(i) - centers.row(assign[i])).squaredNorm();
    if (inertia < best_inertia - 1e-12) {
      best_inertia = inertia;
      best_assign = assign;
    }
  }

  // Relabel by first appearance; empty clusters are not possible for
  // k-means++ seeds on distinct rows, but guard anyway.
  ClusterResult res;
  std::vector<int> relabel(k, -1);
  int next = 0;
  res.assignments.resize(n);
  for (int i = 0; i < n; ++i) {
    int& r = relabel[best_assign[i]];
    if (r < 0) r = next++;
    res.assignments[i] = r;
  }
  require(next == k, ErrorCode::Numeric, "spectral clustering produced an empty cluster");

  std::vector<int> sizes(k, 0);
  for (int i = 0; i < n; ++i) ++sizes[res.assignments[i]];
  res.exemplars.assign(k, -1);
  for (int c = 0; c < k; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(k);
    for (int i = 0; i < n; ++i)
      if (res.assignments[i] == c) mean += emb.row(i);
    mean /= sizes[c];
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      if (res.assignments[i] == c) {
        const double dist = (emb.row(i) - mean).squaredNorm();
        if (dist < m - 1e-15) m = dist, res.exemplars[c] = i;
      }
  }
  int largest = 0;
  for (int c = 1; c < k; ++c)
    if (sizes[c] > sizes[largest] || (sizes[c] == sizes[largest] && res.exemplars[c] < res.exemplars[largest]))
      largest = c;
  res.base = res.exemplars[largest];
  for (int c = 0; c < k; ++c)
    if (c != largest) res.auxiliaries.push_back(res.exemplars[c]);
  return res;
}

// ---- rotation search ----------------------------------------------------------

namespace {

struct Costs {
  double invariant = 0.0;  // after the best rigid alignment
  double positional = 0.0;
};

Costs alignment_costs(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  Vec3 ma = Vec3::Zero(), mb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double saa = 0.0, sbb = 0.0, plain = 0.0;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 x = a[i] - ma, y = b[i] - mb;
    saa += x.squaredNorm();
    sbb += y.squaredNorm();
    plain += (x - y).squaredNorm();
    h += y * x.transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  const double det = (svd.matrixU() * svd.matrixV().transpose()).determinant();
  const double trace = sv(0) + sv(1) + (det < 0 ? -sv(2) : sv(2));
  return {std::max(0.0, saa + sbb - 2.0 * trace), plain};
}

Mat3 rotation_about(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(); }

std::vector<Mat3> rotation_grid(int directions, int in_plane) {
  std::vector<Vec3> dirs{Vec3::UnitZ()};
  for (const auto& d : fibonacci_sphere(std::max(1, directions - 1))) dirs.push_back(d);
  std::vector<Mat3> out;
  out.reserve(dirs.size() * in_plane);
  for (const auto& d : dirs) {
    Mat3 align = Mat3::Identity();
    const Vec3 axis = Vec3::UnitZ().cross(d);
    const double s = axis.norm(), c = d.z();
    if (s > 1e-12) align = rotation_about(axis, std::atan2(s, c));
    else if (c < 0.0) align = rotation_about(Vec3::UnitX(), std::numbers::pi);
    for (int k = 0; k < in_plane; ++k) out.push_back(rotation_about(d, 2.0 * std::numbers::pi * k / in_plane) * align);
  }
  return out;
}

}  // namespace

RotationSearchReport search_rotation(const ParametrizedMesh& source, const ParametrizedMesh& target,
                                     const RotationSearchOptions& opt) {
  require(opt.directions >= 1 && opt.in_plane >= 1 && opt.samples >= 8, ErrorCode::InvalidArgument,
          "rotation search needs directions, in-plane angles and samples");
  const SphereLocator src_loc(source.param.positions, source.mesh.faces);
  const SphereLocator tgt_loc(target.param.positions, target.mesh.faces);
  const auto qs = fibonacci_sphere(opt.samples);
  std::vector<Vec3> a;
  a.reserve(qs.size());
  for (const auto& q : qs) a.push_back(surface_point(source.mesh, src_loc, q));

  const GeometryImage coarse =
      sample_geometry_image(target.mesh, tgt_loc, opt.coarse_resolution, position_fields(target.mesh));
  std::vector<Vec3> b(qs.size());
  RotationSearchReport rep;
  auto eval_coarse = [&](const Mat3& r) {
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const auto uv = octahedral_unfold((r * qs[i]).normalized());
      b[i] = Vec3(sample_bilinear(coarse, uv[0], uv[1], 0), sample_bilinear(coarse, uv[0], uv[1], 1),
                  sample_bilinear(coarse, uv[0], uv[1], 2));
    }
    ++rep.evaluations;
    return alignment_costs(a, b);
  };
  auto eval_exact = [&](const Mat3& r) {
    for (std::size_t i = 0; i < qs.size(); ++i) b[i] = surface_point(target.mesh, tgt_loc, r * qs[i]);
    ++rep.evaluations;
    return alignment_costs(a, b);
  };

  double scale = 0.0;
  {
    Vec3 m = Vec3::Zero();
    for (const auto& p : a) m += p;
    m /= static_cast<double>(a.size());
    for (const auto& p : a) scale += (p - m).squaredNorm();
    scale = std::max(scale, 1e-300);
  }

  const auto grid = rotation_grid(opt.directions, opt.in_plane);
  std::vector<Costs> costs;
  costs.reserve(grid.size());
  for (const auto& r : grid) costs.push_back(eval_coarse(r));

  auto span_of = [&](auto member) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : costs) lo = std::min(lo, c.*member), hi = std::max(hi, c.*member);
    return std::pair{lo, hi};
  };
  const auto [inv_lo, inv_hi] = span_of(&Costs::invariant);
  const auto [pos_lo, pos_hi] = span_of(&Costs::positional);
  if (inv_hi - inv_lo <= 1e-9 * scale && pos_hi - pos_lo <= 1e-9 * scale) {
    rep.degenerate = true;
    rep.cost = eval_exact(Mat3::Identity()).invariant;
    return rep;
  }

  std::size_t best_pos = 0;
  for (std::size_t i = 1; i < costs.size(); ++i)
    if (costs[i].positional < costs[best_pos].positional) best_pos = i;
  rep.positional = costs[best_pos].invariant - inv_lo <= opt.ambiguity_band * scale;
  auto objective = [&](const Costs& c) { return rep.positional ? c.positional : c.invariant; };

  std::size_t best = 0;
  for (std::size_t i = 1; i < costs.size(); ++i)
    if (objective(costs[i]) < objective(costs[best])) best = i;
  // grid[0] is the identity.
  if (objective(costs[0]) <= objective(costs[best]) * (1.0 + opt.identity_margin) + 1e-12 * scale) best = 0;

  Mat3 r = grid[best];
  double current = objective(eval_exact(r));
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  double angle = std::numbers::pi / (2.0 * std::max(2, opt.in_plane));
  while (angle >= opt.refine_min_angle && rep.evaluations < 20000) {
    bool improved = false;
    for (const auto& ax : axes)
      for (double sgn : {1.0, -1.0}) {
        const Mat3 trial = rotation_about(ax, sgn * angle) * r;
        const double c = objective(eval_exact(trial));
        if (c < current) {
          current = c;
          r = trial;
          improved = true;
        }
      }
    if (!improved) angle *= 0.5;
  }
  rep.rotation = r;
  rep.cost = current;
  return rep;
}

DenseCorrespondence sphere_map(const ParametrizedMesh& source, const ParametrizedMesh& target, const Mat3& rotation) {
  require(source.param.positions.size() == source.mesh.vertices.size(), ErrorCode::InvalidArgument,
          "source parametrization does not match its mesh");
  const SphereLocator loc(target.param.positions, target.mesh.faces);
  DenseCorrespondence map;
  map.source_fingerprint = topology_fingerprint(source.mesh);
  map.target_fingerprint = topology_fingerprint(target.mesh);
  map.entries.reserve(source.param.positions.size());
  for (const auto& s : source.param.positions) {
    const auto hit = loc.locate(rotation * s);
    if (!hit) fail(ErrorCode::Numeric, "sphere point location failed; target parametrization is not bijective");
    map.entries.push_back({hit->face, hit->bary});
  }
  return map;
}

DenseCorrespondence dense_map(const ParametrizedMesh& source, const ParametrizedMesh& target,
                              const RotationSearchOptions& options, RotationSearchReport* report) {
  const auto rep = search_rotation(source, target, options);
  if (report) *report = rep;
  return sphere_map(source, target, rep.rotation);
}

DenseCorrespondence identity_map(const ParametrizedMesh& pm) {
  const auto vf = vertex_faces(pm.mesh);
  DenseCorrespondence map;
  map.source_fingerprint = map.target_fingerprint = topology_fingerprint(pm.mesh);
  for (std::size_t v = 0; v < vf.size(); ++v) {
    require(!vf[v].empty(), ErrorCode::Topology, "vertex " + std::to_string(v) + " has no faces");
    const int f = *std::min_element(vf[v].begin(), vf[v].end());
    MapEntry e{f, {0.0, 0.0, 0.0}};
    for (int k = 0; k < 3; ++k)
      if (pm.mesh.faces[f][k] == static_cast<int>(v)) e.bary[k] = 1.0;
    map.entries.push_back(e);
  }
  return map;
}

std::vector<Vec3> mapped_positions(const DenseCorrespondence& map, const TriMesh& target) {
  std::vector<Vec3> out;
  out.reserve(map.entries.size());
  for (const auto& e : map.entries) {
    require(e.face >= 0 && static_cast<std::size_t>(e.face) < target.faces.size(), ErrorCode::InvalidArgument,
            "correspondence face index out of range for the target mesh");
    out.push_back(interpolate(target.vertices, target.faces[e.face], e.bary));
  }
  return out;
}

std::vector<Vec3> mapped_sphere_points(const DenseCorrespondence& map, const ParametrizedMesh& target) {
  std::vector<Vec3> out;
  out.reserve(map.entries.size());
  for (const auto& e : map.entries) {
    require(e.face >= 0 && static_cast<std::size_t>(e.face) < target.mesh.faces.size(), ErrorCode::InvalidArgument,
            "correspondence face index out of range for the target mesh");
    const Vec3 p = interpolate(target.param.positions, target.mesh.faces[e.face], e.bary);
    require(p.norm() > 0.0, ErrorCode::Numeric, "degenerate mapped sphere point");
    out.push_back(p.normalized());
  }
  return out;
}

void check_map(const DenseCorrespondence& map, const TriMesh& source, const TriMesh& target) {
  require(map.entries.size() == source.vertices.size(), ErrorCode::InvalidArgument,
          "correspondence has " + std::to_string(map.entries.size()) + " entries but the source mesh has " +
              std::to_string(source.vertices.size()) + " vertices");
  if (map.source_fingerprint)
    require(map.source_fingerprint == topology_fingerprint(source), ErrorCode::InvalidArgument,
            "correspondence was built for a different source mesh");
  if (map.target_fingerprint)
    require(map.target_fingerprint == topology_fingerprint(target), ErrorCode::InvalidArgument,
            "correspondence was built for a different target mesh");
  for (std::size_t v = 0; v < map.entries.size(); ++v) {
    const auto& e = map.entries[v];
    require(e.face >= 0 && static_cast<std::size_t>(e.face) < target.faces.size(), ErrorCode::InvalidArgument,
            "entry " + std::to_string(v) + " has an invalid target face");
    const double sum = e.bary[0] + e.bary[1] + e.bary[2];
    require(std::abs(sum - 1.0) <= 1e-9 && *std::min_element(e.bary.begin(), e.bary.end()) >= -1e-12,
            ErrorCode::InvalidArgument, "entry " + std::to_string(v) + " has invalid barycentric coordinates");
  }
}

DenseCorrespondence compose(const DenseCorrespondence& first, const DenseCorrespondence& second, const TriMesh& a,
                            const ParametrizedMesh& b) {
  require(second.entries.size() == a.vertices.size(), ErrorCode::InvalidArgument,
          "composition mismatch: second map does not start on the intermediate mesh");
  const std::uint64_t fa = topology_fingerprint(a);
  if (first.target_fingerprint)
    require(first.target_fingerprint == fa, ErrorCode::InvalidArgument,
            "composition mismatch: first map does not end on the intermediate mesh");
  if (second.source_fingerprint)
    require(second.source_fingerprint == fa, ErrorCode::InvalidArgument,
            "composition mismatch: second map does not start on the intermediate mesh");
  const auto images = mapped_sphere_points(second, b);
  const SphereLocator loc(b.param.positions, b.mesh.faces);
  DenseCorrespondence out;
  out.source_fingerprint = first.source_fingerprint;
  out.target_fingerprint = topology_fingerprint(b.mesh);
  out.entries.reserve(first.entries.size());
  for (const auto& e : first.entries) {
    require(e.face >= 0 && static_cast<std::size_t>(e.face) < a.faces.size(), ErrorCode::InvalidArgument,
            "composition mismatch: face index out of range on the intermediate mesh");
    const Vec3 p = interpolate(images, a.faces[e.face], e.bary);
    require(p.norm() > 1e-12, ErrorCode::Numeric, "composed point collapses to the sphere center");
    const auto hit = loc.locate(p);
    if (!hit) fail(ErrorCode::Numeric, "sphere point location failed while composing maps");
    out.entries.push_back({hit->face, hit->bary});
  }
  return out;
}

// ---- consistent images --------------------------------------------------------

GeometryImage consistent_geometry_image(const TriMesh& m, const ParametrizedMesh& b, const DenseCorrespondence& map,
                                        int resolution, const std::vector<VertexField>& m_fields) {
  check_map(map, b.mesh, m);
  const auto fields_m = m_fields.empty() ? position_fields(m) : m_fields;
  std::vector<VertexField> fields_b;
  for (const auto& f : fields_m) {
    require(f.values.size() == m.vertices.size(), ErrorCode::InvalidArgument,
            "channel '" + f.name + "' does not have one value per vertex of M");
    VertexField out{f.name, std::vector<double>(map.entries.size())};
    for (std::size_t v = 0; v < map.entries.size(); ++v) {
      const auto& e = map.entries[v];
      const auto& t = m.faces[e.face];
      out.values[v] = e.bary[0] * f.values[t[0]] + e.bary[1] * f.values[t[1]] + e.bary[2] * f.values[t[2]];
    }
    fields_b.push_back(std::move(out));
  }
  return sample_geometry_image(b.mesh, b.param, resolution, fields_b);
}

Selection select_map_and_filter(const TriMesh& m, const ParametrizedMesh& b,
                                const std::vector<DenseCorrespondence>& candidates, double threshold, int resolution) {
  require(!candidates.empty(), ErrorCode::InvalidArgument, "no candidate maps to select from");
  const ClosestPointTree tree(m);
  Vec3 lo, hi;
  bounding_box(m.vertices, lo, hi);
  const double floor = 1e-12 * (hi - lo).norm();
  Selection sel;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    GeometryImage gim = consistent_geometry_image(m, b, candidates[i], resolution);
    double err = reconstruction_error(tree, gim);
    if (err <= floor) err = 0.0;
    sel.errors.push_back(err);
    if (err < best) {
      best = err;
      sel.chosen = static_cast<int>(i);
      sel.gim = std::move(gim);
    }
  }
  sel.accepted = best <= threshold;
  return sel;
}

double grid_smoothness_energy(const GeometryImage& gim) {
  const auto ch = position_channels(gim);
  const int n = gim.resolution;
  auto p = [&](int r, int c) { return Vec3(gim.at(r, c, ch[0]), gim.at(r, c, ch[1]), gim.at(r, c, ch[2])); };
  double e = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (c + 1 < n) e += (p(r, c + 1) - p(r, c)).squaredNorm();
      if (r + 1 < n) e += (p(r + 1, c) - p(r, c)).squaredNorm();
    }
  return e;
}

// ---- file format ------------------------------------------------------------

void save_correspondence(const DenseCorrespondence& map, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t v = 0; v < map.entries.size(); ++v) {
    const auto& e = map.entries[v];
    arr.push_back({{"source_vertex", v}, {"target_face", e.face}, {"barycentric", e.bary}});
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << arr.dump() << '\n';
}

DenseCorrespondence load_correspondence(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    fail(ErrorCode::Parse, std::string("correspondence file: ") + e.what());
  }
  require(arr.is_array(), ErrorCode::Parse, "correspondence file must hold a JSON array");
  DenseCorrespondence map;
  map.entries.resize(arr.size());
  std::vector<bool> seen(arr.size(), false);
  for (const auto& item : arr) {
    const auto v = item.at("source_vertex").get<std::size_t>();
    require(v < arr.size() && !seen[v], ErrorCode::Parse, "correspondence source vertices must be 0..n-1 once each");
    seen[v] = true;
    map.entries[v].face = item.at("target_face").get<int>();
    map.entries[v].bary = item.at("barycentric").get<std::array<double, 3>>();
  }
  return map;
}

}  // namespace surfnet
