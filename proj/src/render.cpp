#include "surfnet/render.hpp"

#include "surfnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace surfnet {

Mat3 view_rotation(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * std::numbers::pi / 180.0, el = elevation_deg * std::numbers::pi / 180.0;
  Mat3 rz, rx;
  rz << std::cos(az), -std::sin(az), 0, std::sin(az), std::cos(az), 0, 0, 0, 1;
  rx << 1, 0, 0, 0, std::cos(el), -std::sin(el), 0, std::sin(el), std::cos(el);
  return rx * rz;
}

DepthImage render_depth(const TriMesh& mesh, double azimuth_deg, double elevation_deg, int resolution) {
  require(!mesh.empty(), ErrorCode::InvalidArgument, "render_depth: empty mesh");
  require(resolution > 0, ErrorCode::InvalidArgument, "render_depth: resolution must be positive");
  check_indices(mesh);
  const Vec3 center = surface_centroid(mesh);
  const Mat3 R = view_rotation(azimuth_deg, elevation_deg);
  double radius = 0.0;
  std::vector<Vec3> p(mesh.vertices.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = R * (mesh.vertices[i] - center);
    radius = std::max(radius, p[i].norm());
  }
  require(radius > 0.0, ErrorCode::InvalidArgument, "render_depth: degenerate mesh");
  const double extent = 1.1 * radius;
  const double px = 2.0 * extent / resolution;
  const int n = resolution;
  std::vector<double> depth(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::infinity());
  // Image column follows +x, row follows -z.
  auto col_of = [&](double x) { return (x + extent) / px - 0.5; };
  auto row_of = [&](double z) { return (extent - z) / px - 0.5; };
  for (const Face& f : mesh.faces) {
    const Vec3 &a = p[f[0]], &b = p[f[1]], &c = p[f[2]];
    const double ax = col_of(a.x()), ay = row_of(a.z()), bx = col_of(b.x()), by = row_of(b.z()), cx = col_of(c.x()),
                 cy = row_of(c.z());
    const double det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
    if (std::abs(det) < 1e-14) continue;
    const int c0 = std::max(0, static_cast<int>(std::ceil(std::min({ax, bx, cx}))));
    const int c1 = std::min(n - 1, static_cast<int>(std::floor(std::max({ax, bx, cx}))));
    const int r0 = std::max(0, static_cast<int>(std::ceil(std::min({ay, by, cy}))));
    const int r1 = std::min(n - 1, static_cast<int>(std::floor(std::max({ay, by, cy}))));
    for (int r = r0; r <= r1; ++r)
      for (int cc = c0; cc <= c1; ++cc) {
        const double wb = ((cc - ax) * (cy - ay) - (cx - ax) * (r - ay)) / det;
        const double wc = ((bx - ax) * (r - ay) - (cc - ax) * (by - ay)) / det;
        const double wa = 1.0 - wb - wc;
        const double eps = -1e-12;
        if (wa < eps || wb < eps || wc < eps) continue;
        const double d = wa * a.y() + wb * b.y() + wc * c.y();
        double& slot = depth[static_cast<std::size_t>(r) * n + cc];
        slot = std::min(slot, d);
      }
  }
  DepthImage img;
  img.resolution = n;
  img.azimuth = azimuth_deg;
  img.elevation = elevation_deg;
  img.intensity.assign(depth.size(), 0.0);
  double near = std::numeric_limits<double>::infinity();
  for (double d : depth) near = std::min(near, d);
  require(std::isfinite(near), ErrorCode::InvalidArgument, "render_depth: nothing rendered at this view");
  img.near_depth = near;
  img.far_depth = near + 2.0 * radius;
  for (std::size_t i = 0; i < depth.size(); ++i)
    if (std::isfinite(depth[i])) img.intensity[i] = 255.0 - 254.0 * (depth[i] - near) / (2.0 * radius);
  return img;
}

void save_pgm(const DepthImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << "P5\n" << image.resolution << ' ' << image.resolution << "\n255\n";
  std::vector<unsigned char> bytes(image.intensity.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(image.intensity[i]), 0L, 255L));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::Io, "write failed: " + path.string());
}

DepthImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot read " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  require(magic == "P5" && w > 0 && w == h && maxval == 255, ErrorCode::Parse,
          path.string() + ": expected a square binary PGM with maxval 255");
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(in), ErrorCode::Parse, path.string() + ": truncated pixel data");
  DepthImage img;
  img.resolution = w;
  img.intensity.assign(bytes.begin(), bytes.end());
  return img;
}

}  // namespace surfnet
