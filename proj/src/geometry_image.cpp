#include "surfnet/geometry_image.hpp"

#include "surfnet/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace surfnet {

int GeometryImage::channel(const std::string& name) const {
  auto it = std::find(channel_names.begin(), channel_names.end(), name);
  return it == channel_names.end() ? -1 : static_cast<int>(it - channel_names.begin());
}

std::vector<double> GeometryImage::plane(int ch) const {
  std::vector<double> out(pixels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = data[i * channels() + ch];
  return out;
}

void GeometryImage::set_plane(int ch, const std::vector<double>& values) {
  require(values.size() == pixels(), ErrorCode::InvalidArgument, "plane size does not match image");
  for (std::size_t i = 0; i < values.size(); ++i) data[i * channels() + ch] = values[i];
}

std::vector<VertexField> position_fields(const TriMesh& mesh) {
  std::vector<VertexField> f{{"x", {}}, {"y", {}}, {"z", {}}};
  for (const auto& v : mesh.vertices)
    for (int d = 0; d < 3; ++d) f[d].values.push_back(v[d]);
  return f;
}

GeometryImage sample_geometry_image(const TriMesh& mesh, const SphericalParam& param, int resolution,
                                    const std::vector<VertexField>& fields) {
  require(param.positions.size() == mesh.vertices.size(), ErrorCode::InvalidArgument,
          "parametrization does not match mesh");
  SphereLocator locator(param.positions, mesh.faces);
  return sample_geometry_image(mesh, locator, resolution, fields);
}

GeometryImage sample_geometry_image(const TriMesh& mesh, const SphereLocator& locator, int resolution,
                                    const std::vector<VertexField>& fields) {
  require(resolution >= 4, ErrorCode::InvalidArgument, "geometry image resolution must be >= 4");
  require(!fields.empty(), ErrorCode::InvalidArgument, "no channels to sample");
  std::vector<std::string> names;
  for (const auto& f : fields) {
    require(f.values.size() == mesh.vertices.size(), ErrorCode::InvalidArgument,
            "channel '" + f.name + "' does not have one value per vertex");
    names.push_back(f.name);
  }
  GeometryImage gim(resolution, names);
  for (int r = 0; r < resolution; ++r)
    for (int c = 0; c < resolution; ++c) {
      const Vec3 q = octahedral_fold(pixel_u(c, resolution), pixel_v(r, resolution));
      const auto hit = locator.locate(q);
      if (!hit)
        fail(ErrorCode::Numeric, "point location failed at pixel (" + std::to_string(r) + ", " + std::to_string(c) +
                                     "): parametrization has flipped triangles");
      const auto& t = mesh.faces[hit->face];
      for (std::size_t ch = 0; ch < fields.size(); ++ch) {
        const auto& v = fields[ch].values;
        gim.at(r, c, static_cast<int>(ch)) = hit->bary[0] * v[t[0]] + hit->bary[1] * v[t[1]] + hit->bary[2] * v[t[2]];
      }
    }
  return gim;
}

std::array<int, 3> position_channels(const GeometryImage& gim) {
  std::array<int, 3> ch{gim.channel("x"), gim.channel("y"), gim.channel("z")};
  if (ch[0] < 0 || ch[1] < 0 || ch[2] < 0)
    fail(ErrorCode::InvalidArgument, "geometry image lacks x, y, z channels");
  return ch;
}

std::vector<Vec3> decoded_points(const GeometryImage& gim) {
  const auto ch = position_channels(gim);
  std::vector<Vec3> pts;
  pts.reserve(gim.pixels());
  for (int r = 0; r < gim.resolution; ++r)
    for (int c = 0; c < gim.resolution; ++c) pts.emplace_back(gim.at(r, c, ch[0]), gim.at(r, c, ch[1]), gim.at(r, c, ch[2]));
  return pts;
}

TriMesh decode_geometry_image(const GeometryImage& gim) {
  const auto pts = decoded_points(gim);
  const int n = gim.resolution;
  require(n >= 2 && n % 2 == 0, ErrorCode::InvalidArgument, "decoding needs an even resolution");
  auto id = [n](int r, int c) { return r * n + c; };

  std::vector<int> parent(pts.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  // Each side of the square folds onto itself about its midpoint.
  for (int k = 0; k < n; ++k) {
    unite(id(0, k), id(0, n - 1 - k));
    unite(id(n - 1, k), id(n - 1, n - 1 - k));
    unite(id(k, 0), id(n - 1 - k, 0));
    unite(id(k, n - 1), id(n - 1 - k, n - 1));
  }

  TriMesh mesh;
  std::vector<int> vid(pts.size(), -1);
  std::vector<int> members(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int root = find(static_cast<int>(i));
    if (vid[root] < 0) {
      vid[root] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(Vec3::Zero());
    }
    mesh.vertices[vid[root]] += pts[i];
    ++members[vid[root]];
  }
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) mesh.vertices[v] /= members[v];

  auto vtx = [&](int r, int c) { return vid[find(id(r, c))]; };
  auto emit = [&](int a, int b, int c) {
    if (a != b && b != c && a != c) mesh.faces.push_back({a, b, c});
  };
  for (int r = 0; r + 1 < n; ++r)
    for (int c = 0; c + 1 < n; ++c) {
      const int A = vtx(r, c), B = vtx(r, c + 1), C = vtx(r + 1, c + 1), D = vtx(r + 1, c);
      // Diagonals follow the octahedron creases in each quadrant.
      const bool same_sign = (2 * (c + 1) > n) == (2 * (r + 1) > n);
      if (same_sign) {
        emit(A, B, D);
        emit(B, C, D);
      } else {
        emit(A, B, C);
        emit(A, C, D);
      }
    }
  return mesh;
}

double reconstruction_error(const TriMesh& mesh, const GeometryImage& gim) {
  ClosestPointTree tree(mesh);
  return reconstruction_error(tree, gim);
}

double reconstruction_error(const ClosestPointTree& tree, const GeometryImage& gim) {
  const auto pts = decoded_points(gim);
  double sum = 0.0;
  for (const auto& p : pts) sum += tree.closest(p).distance;
  return sum / static_cast<double>(pts.size());
}

double sample_bilinear(const GeometryImage& gim, double u, double v, int ch) {
  const int n = gim.resolution;
  const double x = std::clamp(u * n - 0.5, 0.0, n - 1.0), y = std::clamp(v * n - 0.5, 0.0, n - 1.0);
  const int c0 = std::min(static_cast<int>(std::floor(x)), n - 2), r0 = std::min(static_cast<int>(std::floor(y)), n - 2);
  const double fx = x - c0, fy = y - r0;
  return (1 - fy) * ((1 - fx) * gim.at(r0, c0, ch) + fx * gim.at(r0, c0 + 1, ch)) +
         fy * ((1 - fx) * gim.at(r0 + 1, c0, ch) + fx * gim.at(r0 + 1, c0 + 1, ch));
}

GeometryImage rotate_positions(const GeometryImage& gim, const Mat3& rotation) {
  const auto ch = position_channels(gim);
  GeometryImage out = gim;
  for (int r = 0; r < gim.resolution; ++r)
    for (int c = 0; c < gim.resolution; ++c) {
      const Vec3 p(gim.at(r, c, ch[0]), gim.at(r, c, ch[1]), gim.at(r, c, ch[2]));
      const Vec3 q = rotation * p;
      for (int d = 0; d < 3; ++d) out.at(r, c, ch[d]) = q[d];
    }
  return out;
}

void save_gim(const GeometryImage& gim, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  nlohmann::json header = {{"resolution", gim.resolution},
                           {"channels", gim.channels()},
                           {"channel_names", gim.channel_names},
                           {"dtype", "f32-le"}};
  out << header.dump() << '\n';
  std::vector<char> buf(gim.data.size() * 4);
  for (std::size_t i = 0; i < gim.data.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(gim.data[i]));
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

GeometryImage load_gim(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    fail(ErrorCode::Parse, std::string("GIM header: ") + e.what());
  }
  require(header.value("dtype", "") == "f32-le", ErrorCode::Parse, "GIM dtype must be f32-le");
  GeometryImage gim(header.at("resolution").get<int>(), header.at("channel_names").get<std::vector<std::string>>());
  require(header.at("channels").get<int>() == gim.channels(), ErrorCode::Parse, "GIM channel count mismatch");
  std::vector<unsigned char> buf(gim.data.size() * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(static_cast<std::size_t>(in.gcount()) == buf.size(), ErrorCode::Parse, "GIM payload is truncated");
  for (std::size_t i = 0; i < gim.data.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[i * 4 + b]) << (8 * b);
    gim.data[i] = std::bit_cast<float>(bits);
  }
  return gim;
}

}  // namespace surfnet
