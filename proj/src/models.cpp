#include "surfnet/models.hpp"

#include "surfnet/error.hpp"
#include "surfnet/spatial.hpp"
#include "surfnet/sphere_param.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

namespace surfnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
const char* const kAxes[3] = {"x", "y", "z"};

double wrap_degrees(double d) {
  d = std::fmod(d, 360.0);
  return d < 0 ? d + 360.0 : d;
}

nn::Tensor plane_tensor(const GeometryImage& gim, int ch) {
  return nn::Tensor({1, gim.resolution, gim.resolution}, gim.plane(ch));
}

// Runs fn(0), fn(1), fn(2) on their own threads and rethrows the first error.
template <class Fn>
void per_channel(Fn fn) {
  std::exception_ptr errors[3];
  std::thread threads[3];
  for (int ch = 0; ch < 3; ++ch)
    threads[ch] = std::thread([&, ch] {
      try {
        fn(ch);
      } catch (...) {
        errors[ch] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

json views_json(const std::vector<ViewAngles>& views) {
  json arr = json::array();
  for (const auto& v : views) arr.push_back({v.azimuth, v.elevation});
  return arr;
}

std::vector<ViewAngles> views_from_json(const json& j) {
  std::vector<ViewAngles> out;
  for (const auto& v : j) out.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "missing " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

// ---- parameter vectors ----------------------------------------------------------------

ParamVector ParamVector::one_hot(int cls, int classes, double azimuth_deg, double elevation_deg) {
  require(classes >= 1 && cls >= 0 && cls < classes, ErrorCode::InvalidArgument, "one_hot: class out of range");
  ParamVector v;
  v.code.assign(classes, 0.0);
  v.code[cls] = 1.0;
  v.azimuth = azimuth_deg;
  v.elevation = elevation_deg;
  return v;
}

ParamVector ParamVector::joints(std::vector<double> values) {
  ParamVector v;
  v.code = std::move(values);
  v.has_view = false;
  return v;
}

std::vector<double> ParamVector::encode() const {
  std::vector<double> out = code;
  if (has_view) {
    out.push_back(std::sin(azimuth * kDeg));
    out.push_back(std::cos(azimuth * kDeg));
    out.push_back(std::sin(elevation * kDeg));
    out.push_back(std::cos(elevation * kDeg));
  }
  return out;
}

nn::Tensor ParamVector::tensor() const {
  auto e = encode();
  const int n = static_cast<int>(e.size());
  return nn::Tensor({n}, std::move(e));
}

ParamVector ParamVector::decode(std::span<const double> values, int code_dim, bool has_view) {
  require(static_cast<int>(values.size()) == code_dim + (has_view ? 4 : 0), ErrorCode::InvalidArgument,
          "parameter vector has the wrong length");
  ParamVector v;
  v.code.assign(values.begin(), values.begin() + code_dim);
  v.has_view = has_view;
  if (has_view) {
    v.azimuth = std::atan2(values[code_dim], values[code_dim + 1]) / kDeg;
    v.elevation = std::atan2(values[code_dim + 2], values[code_dim + 3]) / kDeg;
  }
  return v;
}

GeometryImage make_base_gim(const GeometryImage& base, double azimuth_deg, double elevation_deg) {
  return rotate_positions(base, view_rotation(azimuth_deg, elevation_deg));
}

// ---- generation -------------------------------------------------------------------

void ParamModel::check_ready() const {
  for (const auto& n : nets) {
    require(n != nullptr, ErrorCode::State, "parametric model is missing a channel network");
    require(n->trained, ErrorCode::State, "parametric network '" + n->spec().channel + "' is untrained");
  }
  require(base.resolution == nets[0]->spec().gim_res, ErrorCode::State,
          "base geometry image resolution does not match the networks");
}

GeometryImage generate_gim(ParamModel& model, const std::vector<double>& input, double azimuth_deg,
                           double elevation_deg, bool zero_residual) {
  model.check_ready();
  const int dim = model.nets[0]->spec().param_dim;
  require(static_cast<int>(input.size()) == dim, ErrorCode::InvalidArgument,
          "parameter vector has " + std::to_string(input.size()) + " entries, the network expects " + std::to_string(dim));
  GeometryImage out = make_base_gim(model.base, azimuth_deg, elevation_deg);
  if (zero_residual) return out;
  const auto ch = position_channels(out);
  const nn::Tensor x({dim}, input);
  for (int k = 0; k < 3; ++k) {
    const nn::Tensor r = model.nets[k]->forward(x);
    const double inv = 1.0 / model.target_scale[k];
    for (int row = 0; row < out.resolution; ++row)
      for (int col = 0; col < out.resolution; ++col) out.at(row, col, ch[k]) += r.at(0, row, col) * inv;
  }
  return out;
}

GeometryImage generate_gim(ParamModel& model, const ParamVector& v, bool zero_residual) {
  require(v.has_view == model.has_view, ErrorCode::InvalidArgument, "parameter vector view encoding does not match the model");
  return generate_gim(model, v.encode(), v.azimuth, v.elevation, zero_residual);
}

std::vector<std::vector<double>> blend_inputs(const ParamVector& v1, const ParamVector& v2, int steps) {
  require(steps >= 2, ErrorCode::InvalidArgument, "interpolation needs at least 2 steps");
  require(v1.code.size() == v2.code.size() && v1.has_view == v2.has_view, ErrorCode::InvalidArgument,
          "interpolated parameter vectors have different layouts");
  const auto a = v1.encode(), b = v2.encode();
  std::vector<std::vector<double>> out;
  for (int s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / (steps - 1);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = s == 0 ? a[i] : s == steps - 1 ? b[i] : t * b[i] + (1.0 - t) * a[i];
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<GeometryImage> interpolate_params(ParamModel& model, const ParamVector& v1, const ParamVector& v2,
                                              int steps) {
  model.check_ready();
  std::vector<GeometryImage> out;
  for (const auto& in : blend_inputs(v1, v2, steps)) {
    const ParamVector pv = ParamVector::decode(in, static_cast<int>(v1.code.size()), v1.has_view);
    out.push_back(generate_gim(model, in, pv.azimuth, pv.elevation));
  }
  return out;
}

void ImageModel::check_ready() const {
  for (const auto& n : nets) {
    require(n != nullptr, ErrorCode::State, "image model is missing a channel network");
    require(n->trained, ErrorCode::State, "image network '" + n->spec().channel + "' is untrained");
  }
}

bool ImageModel::view_in_range(double azimuth_deg, double elevation_deg) const {
  if (trained_views.empty()) return false;
  double lo_el = 1e9, hi_el = -1e9, best_az = 360.0;
  for (const auto& v : trained_views) {
    lo_el = std::min(lo_el, v.elevation);
    hi_el = std::max(hi_el, v.elevation);
  }
  // The nearest trained azimuth gap must not exceed the widest spacing seen
  // between consecutive trained azimuths.
  std::vector<double> az;
  for (const auto& v : trained_views) az.push_back(wrap_degrees(v.azimuth));
  std::sort(az.begin(), az.end());
  az.erase(std::unique(az.begin(), az.end()), az.end());
  double spacing = 0.0;
  for (std::size_t i = 1; i < az.size(); ++i) spacing = std::max(spacing, az[i] - az[i - 1]);
  if (az.size() == 1) spacing = 0.0;
  for (double a : az) {
    double d = std::abs(wrap_degrees(azimuth_deg) - a);
    best_az = std::min(best_az, std::min(d, 360.0 - d));
  }
  return elevation_deg >= lo_el - 1e-9 && elevation_deg <= hi_el + 1e-9 && best_az <= spacing / 2.0 + 1e-9;
}

nn::Tensor depth_tensor(const DepthImage& image) {
  nn::Tensor t({1, image.resolution, image.resolution});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = image.intensity[i] / 255.0;
  return t;
}

GeometryImage predict_gim(ImageModel& model, const DepthImage& image) {
  model.check_ready();
  const auto& spec = model.nets[0]->spec();
  require(image.resolution == spec.input_res, ErrorCode::InvalidArgument,
          "depth image is " + std::to_string(image.resolution) + " pixels, the network expects " + std::to_string(spec.input_res));
  GeometryImage out(spec.gim_res, {"x", "y", "z"});
  const nn::Tensor x = depth_tensor(image);
  for (int k = 0; k < 3; ++k) {
    const nn::Tensor y = model.nets[k]->forward(x);
    std::vector<double> plane(y.data.begin(), y.data.end());
    for (double& v : plane) v /= model.target_scale[k];
    out.set_plane(k, plane);
  }
  return out;
}

// ---- training data ---------------------------------------------------------------

GeometryImage shape_gim(const Family& family, int shape, int resolution) {
  const ShapeRecord& r = family.shapes.at(shape);
  if (r.gim.resolution == resolution && r.gim.channel("curvature") >= 0) return r.gim;
  auto fields = position_fields(r.mesh);
  fields.push_back({"curvature", mean_curvature(r.mesh).values});
  return consistent_geometry_image(r.mesh, family.base, shared_connectivity_map(family.base.mesh, r.mesh), resolution, fields);
}

GeometryImage base_positions(const Family& family, int resolution) {
  return sample_geometry_image(family.base.mesh, family.base.param, resolution, position_fields(family.base.mesh));
}

std::vector<nn::Sample> param_samples(const Family& family, const GeometryImage& base, int channel,
                                      const std::vector<ViewAngles>& views, bool has_view) {
  const auto ids = family.accepted();
  require(!ids.empty(), ErrorCode::InvalidArgument, "no accepted shapes to train on");
  const int classes = static_cast<int>(family.shapes.size());
  std::vector<nn::Sample> out;
  for (int id : ids) {
    const GeometryImage g = shape_gim(family, id, base.resolution);
    const nn::Tensor curvature = plane_tensor(g, g.channel("curvature"));
    const nn::Tensor weight = nn::normalized_weights(curvature);
    for (const auto& v : views) {
      const GeometryImage target = rotate_positions(g, view_rotation(v.azimuth, v.elevation));
      const GeometryImage b = make_base_gim(base, v.azimuth, v.elevation);
      nn::Sample s;
      ParamVector pv = ParamVector::one_hot(id, classes, v.azimuth, v.elevation);
      pv.has_view = has_view;
      s.input = pv.tensor();
      s.target = plane_tensor(target, channel);
      const auto bp = b.plane(channel);
      for (std::size_t i = 0; i < bp.size(); ++i) s.target[i] -= bp[i];
      s.weight = weight;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<double> ChannelCurves::total() const {
  std::vector<double> t(curves[0].size(), 0.0);
  for (const auto& c : curves)
    for (std::size_t i = 0; i < std::min(c.size(), t.size()); ++i) t[i] += c[i].mean_loss;
  return t;
}

ParamModel train_param_model(const Family& family, const ParamTrainOptions& options, ChannelCurves* curves) {
  require(!options.views.empty(), ErrorCode::InvalidArgument, "no training views");
  ParamModel model;
  model.classes = static_cast<int>(family.shapes.size());
  model.has_view = true;
  model.trained_views = options.views;
  model.base = base_positions(family, options.spec_template.gim_res);
  model.bounds_lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  model.bounds_hi = -model.bounds_lo;
  for (int id : family.accepted()) {
    const GeometryImage g = shape_gim(family, id, model.base.resolution);
    for (const auto& v : options.views)
      for (const Vec3& p : decoded_points(rotate_positions(g, view_rotation(v.azimuth, v.elevation)))) {
        model.bounds_lo = model.bounds_lo.cwiseMin(p);
        model.bounds_hi = model.bounds_hi.cwiseMax(p);
      }
  }
  ChannelCurves local;
  per_channel([&](int ch) {
    nn::NetworkSpec spec = options.spec_template;
    spec.kind = nn::NetKind::ParamToResidualGim;
    spec.channel = kAxes[ch];
    spec.param_dim = model.classes + 4;
    spec.seed = options.spec_template.seed * 3 + static_cast<std::uint64_t>(ch);
    auto net = std::make_unique<nn::Network>(spec);
    auto data = param_samples(family, model.base, ch, options.views);
    model.target_scale[ch] = nn::standardize_targets(data, options.target_rms);
    local.curves[ch] = nn::train(*net, data, options.config);
    model.nets[ch] = std::move(net);
  });
  if (curves) *curves = std::move(local);
  return model;
}

GeometryImage view_frame_gim(const Family& family, int shape, int resolution, double azimuth_deg, double elevation_deg) {
  GeometryImage g = shape_gim(family, shape, resolution);
  const Vec3 c = surface_centroid(family.shapes.at(shape).mesh);
  const auto ch = position_channels(g);
  for (int r = 0; r < g.resolution; ++r)
    for (int col = 0; col < g.resolution; ++col)
      for (int k = 0; k < 3; ++k) g.at(r, col, ch[k]) -= c[k];
  return rotate_positions(g, view_rotation(azimuth_deg, elevation_deg));
}

ImageModel train_image_model(const Family& family, const ImageTrainOptions& options, ChannelCurves* curves) {
  require(!options.views.empty(), ErrorCode::InvalidArgument, "no training views");
  const auto ids = options.shapes.empty() ? family.accepted() : options.shapes;
  require(!ids.empty(), ErrorCode::InvalidArgument, "no shapes to train on");
  const nn::NetworkSpec& t = options.spec_template;
  struct Pair {
    nn::Tensor input;
    GeometryImage target;
    nn::Tensor weight;
  };
  std::vector<Pair> pairs;
  for (int id : ids) {
    require(family.shapes.at(id).accepted, ErrorCode::InvalidArgument, "shape " + std::to_string(id) + " was not accepted");
    const GeometryImage g = shape_gim(family, id, t.gim_res);
    const nn::Tensor weight = nn::normalized_weights(plane_tensor(g, g.channel("curvature")));
    for (const auto& v : options.views)
      pairs.push_back({depth_tensor(render_depth(family.shapes[id].mesh, v.azimuth, v.elevation, t.input_res)),
                       view_frame_gim(family, id, t.gim_res, v.azimuth, v.elevation), weight});
  }
  ImageModel model;
  model.trained_views = options.views;
  ChannelCurves local;
  per_channel([&](int ch) {
    nn::NetworkSpec spec = t;
    spec.kind = nn::NetKind::ImageToGim;
    spec.channel = kAxes[ch];
    spec.seed = t.seed * 3 + static_cast<std::uint64_t>(ch);
    auto net = std::make_unique<nn::Network>(spec);
    std::vector<nn::Sample> data;
    for (const auto& p : pairs) data.push_back({p.input, plane_tensor(p.target, position_channels(p.target)[ch]), p.weight});
    model.target_scale[ch] = nn::standardize_targets(data, options.target_rms);
    local.curves[ch] = nn::train(*net, data, options.config);
    model.nets[ch] = std::move(net);
  });
  if (curves) *curves = std::move(local);
  return model;
}

// ---- persistence ---------------------------------------------------------------------

void save_param_model(const ParamModel& model, const fs::path& dir) {
  model.check_ready();
  fs::create_directories(dir);
  for (int k = 0; k < 3; ++k) nn::save_checkpoint(*model.nets[k], dir / (std::string("net_") + kAxes[k] + ".ckpt"));
  save_gim(model.base, dir / "base.gim");
  write_json({{"format", "surfnet-param-model"}, {"classes", model.classes}, {"has_view", model.has_view},
              {"trained_views", views_json(model.trained_views)}, {"target_scale", model.target_scale},
              {"bounds", {model.bounds_lo[0], model.bounds_lo[1], model.bounds_lo[2], model.bounds_hi[0],
                          model.bounds_hi[1], model.bounds_hi[2]}}},
             dir / "model.json");
}

ParamModel load_param_model(const fs::path& dir) {
  const json meta = read_json(dir / "model.json");
  require(meta.value("format", "") == "surfnet-param-model", ErrorCode::Parse, dir.string() + ": not a parametric model");
  ParamModel model;
  for (int k = 0; k < 3; ++k) model.nets[k] = nn::load_checkpoint(dir / (std::string("net_") + kAxes[k] + ".ckpt"));
  model.base = load_gim(dir / "base.gim");
  model.classes = meta.at("classes").get<int>();
  model.has_view = meta.at("has_view").get<bool>();
  model.trained_views = views_from_json(meta.at("trained_views"));
  model.target_scale = meta.at("target_scale").get<std::array<double, 3>>();
  const auto b = meta.at("bounds").get<std::array<double, 6>>();
  model.bounds_lo = Vec3(b[0], b[1], b[2]);
  model.bounds_hi = Vec3(b[3], b[4], b[5]);
  return model;
}

void save_image_model(const ImageModel& model, const fs::path& dir) {
  model.check_ready();
  fs::create_directories(dir);
  for (int k = 0; k < 3; ++k) nn::save_checkpoint(*model.nets[k], dir / (std::string("net_") + kAxes[k] + ".ckpt"));
  write_json({{"format", "surfnet-image-model"}, {"trained_views", views_json(model.trained_views)},
              {"target_scale", model.target_scale}},
             dir / "model.json");
}

ImageModel load_image_model(const fs::path& dir) {
  const json meta = read_json(dir / "model.json");
  require(meta.value("format", "") == "surfnet-image-model", ErrorCode::Parse, dir.string() + ": not an image model");
  ImageModel model;
  for (int k = 0; k < 3; ++k) model.nets[k] = nn::load_checkpoint(dir / (std::string("net_") + kAxes[k] + ".ckpt"));
  model.trained_views = views_from_json(meta.at("trained_views"));
  model.target_scale = meta.at("target_scale").get<std::array<double, 3>>();
  return model;
}

// ---- rectification ---------------------------------------------------------------------

DenseCorrespondence correspondence_from_gim(const TriMesh& m, const ParametrizedMesh& base, const GeometryImage& predicted,
                                            double azimuth_deg, double elevation_deg) {
  const auto ch = position_channels(predicted);
  const Mat3 back = view_rotation(azimuth_deg, elevation_deg).transpose();
  const Vec3 c = surface_centroid(m);
  const ClosestPointTree tree(m);
  DenseCorrespondence map;
  map.source_fingerprint = topology_fingerprint(base.mesh);
  map.target_fingerprint = topology_fingerprint(m);
  map.entries.reserve(base.param.positions.size());
  for (const Vec3& s : base.param.positions) {
    const auto uv = octahedral_unfold(s);
    const Vec3 p(sample_bilinear(predicted, uv[0], uv[1], ch[0]), sample_bilinear(predicted, uv[0], uv[1], ch[1]),
                 sample_bilinear(predicted, uv[0], uv[1], ch[2]));
    const SurfacePoint hit = tree.closest(back * p + c);
    map.entries.push_back({hit.face, hit.bary});
  }
  return map;
}

Rectification rectify_correspondence(const TriMesh& m, const ParametrizedMesh& base, ImageModel& model,
                                     double azimuth_deg, double elevation_deg, int image_res) {
  model.check_ready();
  Rectification r;
  r.predicted = predict_gim(model, render_depth(m, azimuth_deg, elevation_deg, image_res));
  r.map = correspondence_from_gim(m, base, r.predicted, azimuth_deg, elevation_deg);
  r.low_confidence = !model.view_in_range(azimuth_deg, elevation_deg);
  return r;
}

DenseCorrespondence perturb_correspondence(const DenseCorrespondence& map, const TriMesh& m, double sigma,
                                           std::uint64_t seed) {
  require(sigma >= 0.0, ErrorCode::InvalidArgument, "noise level must be non-negative");
  Vec3 lo, hi;
  bounding_box(m.vertices, lo, hi);
  const double s = sigma * (hi - lo).norm();
  const ClosestPointTree tree(m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  DenseCorrespondence out = map;
  const auto pts = mapped_positions(map, m);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 jitter(n(rng), n(rng), n(rng));
    const SurfacePoint hit = tree.closest(pts[i] + s * jitter);
    out.entries[i] = {hit.face, hit.bary};
  }
  return out;
}

double map_smoothness_energy(const TriMesh& m, const ParametrizedMesh& base, const DenseCorrespondence& map,
                             int resolution) {
  return grid_smoothness_energy(consistent_geometry_image(m, base, map, resolution));
}

double mean_position_error(const GeometryImage& a, const GeometryImage& b) {
  require(a.resolution == b.resolution && a.resolution > 0, ErrorCode::InvalidArgument,
          "geometry images differ in resolution");
  const auto pa = decoded_points(a), pb = decoded_points(b);
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) sum += (pa[i] - pb[i]).norm();
  return sum / static_cast<double>(pa.size());
}

double family_diagonal(const Family& family) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (int id : family.accepted())
    for (const Vec3& p : family.shapes[id].mesh.vertices) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  require(lo.allFinite(), ErrorCode::InvalidArgument, "family has no accepted shapes");
  return (hi - lo).norm();
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  require(!a.empty() && !b.empty(), ErrorCode::InvalidArgument, "chamfer distance of an empty point set");
  auto one_way = [](std::span<const Vec3> p, std::span<const Vec3> q) {
    double sum = 0.0;
    for (const Vec3& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& y : q) best = std::min(best, (x - y).squaredNorm());
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(p.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

}  // namespace surfnet
