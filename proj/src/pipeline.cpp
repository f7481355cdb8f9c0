#include "surfnet/pipeline.hpp"

#include "surfnet/correspondence.hpp"
#include "surfnet/dataset.hpp"
#include "surfnet/error.hpp"
#include "surfnet/geometry_image.hpp"
#include "surfnet/models.hpp"
#include "surfnet/sphere_param.hpp"
#include "surfnet/voxel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace surfnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- config access ---------------------------------------------------------------

struct Ctx {
  std::string stage;
  json cfg;
  fs::path out;
  std::uint64_t seed = 0;

  bool has(const char* key) const { return cfg.contains(key) && !cfg.at(key).is_null(); }

  template <class T>
  T get(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return cfg.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::InvalidArgument, stage + ": option '" + key + "' has the wrong type");
    }
  }

  /// Existing file or directory named by `key`; the error names the artifact.
  fs::path input(const char* key, const std::string& what) const {
    require(has(key), ErrorCode::InvalidArgument, stage + ": missing option '" + key + "' (" + what + ")");
    const fs::path p = get<std::string>(key, "");
    require(fs::exists(p), ErrorCode::Io, stage + ": missing " + what + ": " + p.string());
    return p;
  }

  /// Input from `key`, or the default location an earlier stage writes.
  fs::path input_or(const char* key, const fs::path& fallback, const std::string& what) const {
    const fs::path p = has(key) ? fs::path(get<std::string>(key, "")) : fallback;
    require(fs::exists(p), ErrorCode::Io,
            stage + ": missing " + what + ": " + p.string() + (has(key) ? "" : " (run the producing stage first)"));
    return p;
  }

  fs::path dir(const std::string& name) const {
    fs::path d = out / name;
    fs::create_directories(d);
    return d;
  }
};

struct StageResult {
  json outputs = json::object();
  json metrics = json::object();
  std::vector<fs::path> hashed_inputs;
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + p.string());
  out << text;
}

std::uint64_t hash_path(const fs::path& p, std::uint64_t h) {
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h = fnv1a(fs::relative(f, p).generic_string(), h);
      h = fnv1a(read_bytes(f), h);
    }
    return h;
  }
  return fnv1a(read_bytes(p), h);
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

ParametrizedMesh parametrize_file(const fs::path& obj, const Ctx& c, ParamReport* report = nullptr) {
  ParametrizedMesh pm;
  pm.mesh = load_obj(obj);
  ParamOptions o;
  o.max_iters = c.get<int>("max_iters", o.max_iters);
  pm.param = parametrize_authalic(pm.mesh, o, report);
  return pm;
}

GeometryImage encode_with_curvature(const TriMesh& mesh, const SphericalParam& param, int res) {
  auto fields = position_fields(mesh);
  fields.push_back({"curvature", mean_curvature(mesh).values});
  return sample_geometry_image(mesh, param, res, fields);
}

json vec_json(const Vec3& v) { return {v[0], v[1], v[2]}; }

std::vector<ViewAngles> training_views(const Ctx& c) {
  if (c.has("views")) {
    std::vector<ViewAngles> v;
    for (const auto& e : c.cfg.at("views")) v.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    return v;
  }
  return azimuth_ring(c.get<int>("azimuths", 8), c.get<double>("azimuth_step", 15.0), c.get<double>("elevation", 0.0));
}

nn::TrainConfig train_config(const Ctx& c) {
  nn::TrainConfig t;
  t.epochs = c.get<int>("epochs", t.epochs);
  t.learning_rate = c.get<double>("lr", t.learning_rate);
  t.batch_size = c.get<int>("batch", t.batch_size);
  t.momentum = c.get<double>("momentum", t.momentum);
  t.seed = c.seed;
  t.curvature_weighted = c.get<std::string>("loss", "curvature-weighted") != "plain";
  t.validate();
  return t;
}

json curves_json(const ChannelCurves& cc) {
  json j = json::object();
  const char* axes[3] = {"x", "y", "z"};
  for (int k = 0; k < 3; ++k) {
    json arr = json::array();
    for (const auto& e : cc.curves[k]) arr.push_back(e.mean_loss);
    j[axes[k]] = arr;
  }
  return j;
}

void write_curves(const ChannelCurves& cc, const fs::path& dir, StageResult& r) {
  const char* axes[3] = {"x", "y", "z"};
  for (int k = 0; k < 3; ++k) {
    const fs::path p = dir / (std::string("loss_") + axes[k] + ".csv");
    nn::save_loss_csv(cc.curves[k], p);
    r.outputs[std::string("loss_") + axes[k]] = p.string();
  }
}

json shape_only(nn::NetworkSpec spec) {
  spec.paper_depth = true;
  json nets = json::array();
  for (const char* ch : {"x", "y", "z"}) {
    spec.channel = ch;
    nn::Network net(spec);
    nets.push_back({{"channel", ch},
                    {"depth", net.depth()},
                    {"parameters", net.parameter_count()},
                    {"input_shape", net.input_shape()},
                    {"output_shape", net.output_shape()}});
  }
  return nets;
}

// ---- stages -------------------------------------------------------------------------

StageResult gen_dataset(const Ctx& c) {
  FamilySpec spec = c.has("family") ? FamilySpec::from_json(c.cfg.at("family")) : FamilySpec{};
  spec.gim_res = c.get<int>("gim_res", spec.gim_res);
  spec.image_res = c.get<int>("resolution", spec.image_res);
  spec.threshold = c.get<double>("threshold", spec.threshold);
  spec.validate();
  const unsigned workers = c.get<unsigned>("workers", 0);
  const Family fam = build_family(spec, c.seed, workers);
  const fs::path dir = c.dir("dataset");
  write_dataset(fam, dir, workers);
  StageResult r;
  r.outputs["dataset"] = dir.string();
  r.outputs["manifest"] = (dir / "manifest.json").string();
  double worst = 0.0;
  for (const auto& s : fam.shapes)
    if (s.accepted) worst = std::max(worst, s.reconstruction_error);
  r.metrics = {{"shapes", fam.shapes.size()},
               {"accepted", fam.accepted().size()},
               {"base_index", fam.base_index},
               {"max_reconstruction_error", worst},
               {"depth_images", fam.accepted().size() * spec.views.size()}};
  return r;
}

StageResult preprocess(const Ctx& c) {
  StageResult r;
  const fs::path in = c.input("input", "input mesh");
  r.hashed_inputs.push_back(in);
  const TriMesh mesh = load_obj(in);
  OccupancyGrid grid = voxelize(mesh, c.get<int>("resolution", 128), VoxelMode::Solid, c.seed);
  SurfaceRepairReport rep;
  TriMesh surface = extract_surface(grid, &rep);
  surface = laplacian_smooth(surface, c.get<int>("smooth_iterations", 10), c.get<double>("smooth_step", 0.5));
  validate(surface);
  const EulerInfo e = euler_genus(surface);
  const fs::path out = c.dir("preprocess") / (stem_of(in) + ".obj");
  save_obj(surface, out);
  r.outputs["mesh"] = out.string();
  r.metrics = {{"vertices", surface.vertices.size()},
               {"faces", surface.faces.size()},
               {"euler_characteristic", e.chi},
               {"genus", e.genus},
               {"fell_back_to_shell", grid.fell_back_to_shell},
               {"removed_components", rep.removed_components},
               {"filled_cavities", rep.filled_cavities},
               {"pinch_edges", rep.pinch_edges},
               {"split_vertices", rep.split_vertices},
               {"filled_cells", rep.filled_cells}};
  return r;
}

StageResult parametrize(const Ctx& c) {
  StageResult r;
  const fs::path in = c.input("input", "input mesh");
  r.hashed_inputs.push_back(in);
  ParamReport rep;
  const ParametrizedMesh pm = parametrize_file(in, c, &rep);
  const fs::path out = c.dir("parametrize") / (stem_of(in) + "_sphere.obj");
  save_sphere_param(pm.mesh, pm.param, out);
  r.outputs["sphere"] = out.string();
  r.metrics = {{"initial_distortion", rep.initial_distortion},
               {"final_distortion", rep.final_distortion},
               {"iterations", rep.iterations},
               {"accepted_steps", rep.accepted},
               {"flipped", count_flipped(pm.mesh, pm.param.positions)}};
  return r;
}

StageResult encode(const Ctx& c) {
  StageResult r;
  const fs::path in = c.input("input", "input mesh");
  r.hashed_inputs.push_back(in);
  ParametrizedMesh pm;
  if (c.has("sphere")) {
    const fs::path sp = c.input("sphere", "sphere parametrization");
    r.hashed_inputs.push_back(sp);
    pm.mesh = load_obj(in);
    pm.param = load_sphere_param(pm.mesh, sp);
  } else {
    pm = parametrize_file(in, c);
  }
  const int res = c.get<int>("gim_res", 64);
  const GeometryImage gim = encode_with_curvature(pm.mesh, pm.param, res);
  const fs::path out = c.dir("encode") / (stem_of(in) + ".gim");
  save_gim(gim, out);
  r.outputs["gim"] = out.string();
  r.metrics = {{"resolution", res}, {"reconstruction_error", reconstruction_error(pm.mesh, gim)}};
  return r;
}

StageResult cluster(const Ctx& c) {
  StageResult r;
  require(c.has("inputs") && c.cfg.at("inputs").is_array() && !c.cfg.at("inputs").empty(), ErrorCode::InvalidArgument,
          c.stage + ": missing option 'inputs' (list of meshes)");
  std::vector<std::string> paths;
  std::vector<D2Descriptor> d;
  for (const auto& e : c.cfg.at("inputs")) {
    const fs::path p = e.get<std::string>();
    require(fs::exists(p), ErrorCode::Io, c.stage + ": missing input mesh: " + p.string());
    r.hashed_inputs.push_back(p);
    paths.push_back(p.string());
    d.push_back(d2_descriptor(load_obj(p), D2Options{}, c.seed));
  }
  const int k = c.get<int>("k", 3);
  const ClusterResult cr = spectral_cluster(similarity_matrix(d), k, c.seed);
  json doc = {{"inputs", paths},
              {"k", k},
              {"assignments", cr.assignments},
              {"exemplars", cr.exemplars},
              {"base", cr.base},
              {"auxiliaries", cr.auxiliaries}};
  const fs::path out = c.dir("cluster") / "cluster.json";
  write_text(out, doc.dump(2) + "\n");
  r.outputs["clusters"] = out.string();
  r.metrics = {{"assignments", cr.assignments}, {"base", paths[cr.base]}, {"base_index", cr.base},
               {"exemplars", cr.exemplars}};
  return r;
}

StageResult correspond(const Ctx& c) {
  StageResult r;
  const fs::path base_path = c.input("base", "base mesh");
  const fs::path in = c.input("input", "input mesh");
  r.hashed_inputs = {base_path, in};
  ParametrizedMesh b;
  if (c.has("base_sphere")) {
    const fs::path sp = c.input("base_sphere", "base sphere parametrization");
    r.hashed_inputs.push_back(sp);
    b.mesh = load_obj(base_path);
    b.param = load_sphere_param(b.mesh, sp);
  } else {
    b = parametrize_file(base_path, c);
  }
  const ParametrizedMesh m = parametrize_file(in, c);
  std::vector<DenseCorrespondence> candidates{dense_map(b, m)};
  std::vector<std::string> labels{"direct"};
  if (c.has("auxiliaries"))
    for (const auto& e : c.cfg.at("auxiliaries")) {
      const fs::path ap = e.get<std::string>();
      require(fs::exists(ap), ErrorCode::Io, c.stage + ": missing auxiliary mesh: " + ap.string());
      r.hashed_inputs.push_back(ap);
      const ParametrizedMesh a = parametrize_file(ap, c);
      candidates.push_back(compose(dense_map(b, a), dense_map(a, m), a.mesh, m));
      labels.push_back("via " + ap.filename().string());
    }
  const int res = c.get<int>("gim_res", 64);
  const Selection sel = select_map_and_filter(m.mesh, b, candidates, c.get<double>("threshold", 0.05), res);
  const fs::path dir = c.dir("correspond");
  const fs::path map_path = dir / (stem_of(in) + ".map.json");
  save_correspondence(candidates[sel.chosen], map_path);
  r.outputs["map"] = map_path.string();
  if (sel.accepted) {
    const fs::path gim_path = dir / (stem_of(in) + ".gim");
    save_gim(sel.gim, gim_path);
    r.outputs["gim"] = gim_path.string();
  }
  r.metrics = {{"accepted", sel.accepted},
               {"chosen", labels[sel.chosen]},
               {"errors", sel.errors},
               {"smoothness_energy", map_smoothness_energy(m.mesh, b, candidates[sel.chosen], res)}};
  return r;
}

StageResult train_param(const Ctx& c) {
  StageResult r;
  const fs::path ds = c.input_or("dataset", c.out / "dataset", "dataset");
  r.hashed_inputs.push_back(ds / "manifest.json");
  nn::NetworkSpec spec = nn::param_to_residual_gim_spec("x", 1, c.get<int>("gim_res", 32));
  spec.seed = c.seed;
  if (c.get<bool>("paper_depth", false)) {
    const Family fam = load_dataset(ds);
    spec.param_dim = static_cast<int>(fam.shapes.size()) + 4;
    r.metrics = {{"shape_only", true}, {"networks", shape_only(spec)}};
    return r;
  }
  const Family fam = load_dataset(ds);
  ParamTrainOptions o;
  o.spec_template = spec;
  o.config = train_config(c);
  o.views = training_views(c);
  ChannelCurves cc;
  ParamModel model = train_param_model(fam, o, &cc);
  const fs::path dir = c.dir("param_model");
  save_param_model(model, dir);
  write_curves(cc, dir, r);
  r.outputs["model"] = dir.string();

  double err = 0.0, base_err = 0.0;
  int n = 0;
  for (int id : fam.accepted())
    for (const auto& v : o.views) {
      const GeometryImage target = rotate_positions(shape_gim(fam, id, model.base.resolution), view_rotation(v.azimuth, v.elevation));
      const ParamVector pv = ParamVector::one_hot(id, model.classes, v.azimuth, v.elevation);
      err += mean_position_error(generate_gim(model, pv), target);
      base_err += mean_position_error(generate_gim(model, pv, true), target);
      ++n;
    }
  const double diag = family_diagonal(fam);
  r.metrics = {{"samples", n},
               {"loss", curves_json(cc)},
               {"mean_error", err / n},
               {"mean_error_over_diagonal", err / n / diag},
               {"zero_residual_error_over_diagonal", base_err / n / diag}};
  return r;
}

StageResult train_img(const Ctx& c) {
  StageResult r;
  const fs::path ds = c.input_or("dataset", c.out / "dataset", "dataset");
  r.hashed_inputs.push_back(ds / "manifest.json");
  nn::NetworkSpec spec = nn::image_to_gim_spec("x", c.get<int>("resolution", 64), c.get<int>("gim_res", 32), 1);
  spec.seed = c.seed;
  if (c.get<bool>("paper_depth", false)) {
    r.metrics = {{"shape_only", true}, {"networks", shape_only(spec)}};
    return r;
  }
  const Family fam = load_dataset(ds);
  ImageTrainOptions o;
  o.spec_template = spec;
  o.config = train_config(c);
  o.views = training_views(c);
  o.shapes = c.get<std::vector<int>>("shapes", {});
  ChannelCurves cc;
  ImageModel model = train_image_model(fam, o, &cc);
  const fs::path dir = c.dir("image_model");
  save_image_model(model, dir);
  write_curves(cc, dir, r);
  r.outputs["model"] = dir.string();
  r.metrics = {{"loss", curves_json(cc)}, {"views", o.views.size()}};
  return r;
}

json surface_metrics(const GeometryImage& gim, const ParamModel* model) {
  const TriMesh mesh = decode_geometry_image(gim);
  bool finite = true;
  for (const Vec3& p : mesh.vertices) finite = finite && p.allFinite();
  Vec3 lo, hi;
  bounding_box(mesh.vertices, lo, hi);
  const EulerInfo e = euler_genus(mesh);
  json j = {{"finite", finite}, {"euler_characteristic", e.chi}, {"closed", e.chi == 2},
            {"bounds_lo", vec_json(lo)}, {"bounds_hi", vec_json(hi)}};
  if (model) {
    const Vec3 mid = 0.5 * (model->bounds_lo + model->bounds_hi), half = 0.625 * (model->bounds_hi - model->bounds_lo);
    const bool inside = ((lo - mid).cwiseAbs().array() <= half.array()).all() &&
                        ((hi - mid).cwiseAbs().array() <= half.array()).all();
    j["within_training_bounds_1_25"] = inside;
  }
  return j;
}

std::string view_tag(double az, double el) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "az%g_el%g", az, el);
  return buf;
}

StageResult generate(const Ctx& c) {
  StageResult r;
  const fs::path md = c.input_or("model", c.out / "param_model", "parametric model");
  r.hashed_inputs.push_back(md);
  ParamModel model = load_param_model(md);
  const int cls = c.get<int>("class", 0);
  const double az = c.get<double>("azimuth", 0.0), el = c.get<double>("elevation", 0.0);
  const GeometryImage gim = generate_gim(model, ParamVector::one_hot(cls, model.classes, az, el),
                                         c.get<bool>("zero_residual", false));
  const fs::path dir = c.dir("generate");
  const std::string stem = "class" + std::to_string(cls) + "_" + view_tag(az, el);
  save_gim(gim, dir / (stem + ".gim"));
  save_obj(decode_geometry_image(gim), dir / (stem + ".obj"));
  r.outputs = {{"gim", (dir / (stem + ".gim")).string()}, {"mesh", (dir / (stem + ".obj")).string()}};
  r.metrics = surface_metrics(gim, &model);
  return r;
}

StageResult interpolate(const Ctx& c) {
  StageResult r;
  const fs::path md = c.input_or("model", c.out / "param_model", "parametric model");
  r.hashed_inputs.push_back(md);
  ParamModel model = load_param_model(md);
  const double az = c.get<double>("azimuth", 0.0), el = c.get<double>("elevation", 0.0);
  const ParamVector a = ParamVector::one_hot(c.get<int>("from", 0), model.classes, c.get<double>("from_azimuth", az), el);
  const ParamVector b = ParamVector::one_hot(c.get<int>("to", 1), model.classes, c.get<double>("to_azimuth", az), el);
  const auto gims = interpolate_params(model, a, b, c.get<int>("steps", 5));
  const fs::path dir = c.dir("interpolate");
  json files = json::array(), chamfer = json::array();
  std::vector<std::vector<Vec3>> clouds;
  for (std::size_t s = 0; s < gims.size(); ++s) {
    clouds.push_back(decoded_points(gims[s]));
    const fs::path p = dir / ("step_" + std::to_string(s) + ".obj");
    save_obj_points(clouds.back(), p);
    files.push_back(p.string());
    if (s > 0) chamfer.push_back(chamfer_distance(clouds[s - 1], clouds[s]));
  }
  r.outputs["point_clouds"] = files;
  r.metrics = {{"steps", gims.size()},
               {"consecutive_chamfer", chamfer},
               {"endpoint_chamfer", chamfer_distance(clouds.front(), clouds.back())}};
  return r;
}

StageResult export_gim(const Ctx& c) {
  StageResult r;
  const fs::path in = c.input("input", "geometry image");
  r.hashed_inputs.push_back(in);
  const GeometryImage gim = load_gim(in);
  const std::string mode = c.get<std::string>("mode", "mesh");
  require(mode == "mesh" || mode == "points", ErrorCode::InvalidArgument, c.stage + ": mode must be mesh or points");
  const fs::path out = c.dir("export") / (stem_of(in) + ".obj");
  if (mode == "mesh")
    save_obj(decode_geometry_image(gim), out);
  else
    save_obj_points(decoded_points(gim), out);
  r.outputs["obj"] = out.string();
  r.metrics = {{"resolution", gim.resolution}, {"mode", mode}};
  return r;
}

StageResult rectify(const Ctx& c) {
  StageResult r;
  const fs::path md = c.input_or("model", c.out / "image_model", "image model");
  const fs::path ds = c.input_or("dataset", c.out / "dataset", "dataset");
  r.hashed_inputs = {md, ds / "manifest.json"};
  ImageModel model = load_image_model(md);
  const Family fam = load_dataset(ds);
  const int shape = c.get<int>("shape", fam.accepted().empty() ? 0 : fam.accepted().front());
  require(shape >= 0 && shape < static_cast<int>(fam.shapes.size()), ErrorCode::InvalidArgument,
          c.stage + ": shape index out of range");
  const TriMesh& m = fam.shapes[shape].mesh;
  const double az = c.get<double>("azimuth", 0.0), el = c.get<double>("elevation", 0.0);
  const int res = c.get<int>("gim_res", model.nets[0] ? model.nets[0]->spec().gim_res : 32);
  const DenseCorrespondence input =
      perturb_correspondence(shared_connectivity_map(fam.base.mesh, m), m, c.get<double>("noise", 0.0), c.seed);
  const Rectification rect = rectify_correspondence(m, fam.base, model, az, el, model.nets[0]->spec().input_res);
  const fs::path dir = c.dir("rectify");
  const fs::path map_path = dir / ("shape" + std::to_string(shape) + "_" + view_tag(az, el) + ".map.json");
  save_correspondence(rect.map, map_path);
  r.outputs["map"] = map_path.string();
  const double before = map_smoothness_energy(m, fam.base, input, res), after = map_smoothness_energy(m, fam.base, rect.map, res);
  r.metrics = {{"shape", shape},
               {"low_confidence", rect.low_confidence},
               {"input_smoothness_energy", before},
               {"rectified_smoothness_energy", after},
               {"reduction", before > 0.0 ? 1.0 - after / before : 0.0}};
  return r;
}

using StageFn = StageResult (*)(const Ctx&);

const std::vector<std::pair<std::string, StageFn>>& stage_table() {
  static const std::vector<std::pair<std::string, StageFn>> t = {
      {"gen-dataset", gen_dataset}, {"preprocess", preprocess}, {"parametrize", parametrize},
      {"encode", encode},           {"cluster", cluster},       {"correspond", correspond},
      {"train-img", train_img},     {"train-param", train_param}, {"generate", generate},
      {"interpolate", interpolate}, {"export", export_gim},     {"rectify", rectify}};
  return t;
}

bool outputs_exist(const json& outputs) {
  for (const auto& [k, v] : outputs.items()) {
    if (v.is_string() && !fs::exists(v.get<std::string>())) return false;
    if (v.is_array())
      for (const auto& e : v)
        if (e.is_string() && !fs::exists(e.get<std::string>())) return false;
  }
  return true;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : stage_table()) n.push_back(name);
    return n;
  }();
  return names;
}

json run_stage(const std::string& stage, const json& config) {
  const auto& table = stage_table();
  const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == stage; });
  require(it != table.end(), ErrorCode::InvalidArgument, "unknown stage '" + stage + "'");
  require(config.is_object(), ErrorCode::InvalidArgument, stage + ": configuration must be a JSON object");

  Ctx c;
  c.stage = stage;
  c.cfg = config;
  c.out = c.get<std::string>("out", "surfnet_out");
  c.seed = c.get<std::uint64_t>("seed", 0);
  const bool force = c.get<bool>("force", false);
  c.cfg.erase("force");
  fs::create_directories(c.out);

  // The stamp records the hash of the configuration plus every input file.
  json key = c.cfg;
  key.erase("out");
  key.erase("workers");
  std::uint64_t h = fnv1a(stage + "\n" + key.dump());
  const fs::path stamp_dir = c.out / ".stamps";
  const fs::path stamp = stamp_dir / (stage + ".json");
  auto input_hash = [&](const std::vector<fs::path>& inputs) {
    std::uint64_t x = h;
    for (const auto& p : inputs) x = hash_path(p, fnv1a(p.generic_string(), x));
    return hex(x);
  };
  if (!force && fs::exists(stamp)) {
    try {
      const json prev = json::parse(read_bytes(stamp));
      std::vector<fs::path> inputs;
      bool present = true;
      for (const auto& p : prev.at("inputs")) {
        inputs.emplace_back(p.get<std::string>());
        present = present && fs::exists(inputs.back());
      }
      if (present && prev.at("config") == key && prev.at("hash") == input_hash(inputs) &&
          outputs_exist(prev.at("summary").at("outputs"))) {
        json s = prev.at("summary");
        s["skipped"] = true;
        return s;
      }
    } catch (const json::exception&) {
      // unreadable stamp: run the stage
    }
  }

  StageResult r = it->second(c);
  json inputs = json::array();
  for (const auto& p : r.hashed_inputs) inputs.push_back(p.generic_string());
  json summary = {{"stage", stage},     {"status", "ok"},        {"skipped", false}, {"seed", c.seed},
                  {"hash", input_hash(r.hashed_inputs)}, {"outputs", r.outputs}, {"metrics", r.metrics}};
  fs::create_directories(stamp_dir);
  write_text(stamp, json{{"config", key}, {"inputs", inputs}, {"hash", summary["hash"]}, {"summary", summary}}.dump(2) + "\n");
  return summary;
}

}  // namespace surfnet
