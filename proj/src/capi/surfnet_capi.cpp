#include "surfnet/surfnet.h"

#include "surfnet/error.hpp"
#include "surfnet/geometry_image.hpp"
#include "surfnet/mesh.hpp"
#include "surfnet/models.hpp"
#include "surfnet/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct sn_mesh {
  surfnet::TriMesh mesh;
};
struct sn_gim {
  surfnet::GeometryImage gim;
};
struct sn_param_model {
  surfnet::ParamModel model;
};

namespace {

thread_local std::string g_last_error;

sn_status to_status(surfnet::ErrorCode c) {
  switch (c) {
    case surfnet::ErrorCode::InvalidArgument: return SN_ERR_INVALID_ARGUMENT;
    case surfnet::ErrorCode::Io: return SN_ERR_IO;
    case surfnet::ErrorCode::Parse: return SN_ERR_PARSE;
    case surfnet::ErrorCode::Topology: return SN_ERR_TOPOLOGY;
    case surfnet::ErrorCode::Numeric: return SN_ERR_NUMERIC;
    case surfnet::ErrorCode::State: return SN_ERR_STATE;
  }
  return SN_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

// Runs fn, translating exceptions into a status and the thread's last error.
template <class Fn>
sn_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SN_OK;
  } catch (const surfnet::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return SN_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SN_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  surfnet::require(p != nullptr, surfnet::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

}  // namespace

extern "C" {

const char* sn_version(void) { return "0.1.0"; }

const char* sn_last_error(void) { return g_last_error.c_str(); }

const char* sn_status_name(sn_status status) {
  switch (status) {
    case SN_OK: return "ok";
    case SN_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SN_ERR_IO: return "io";
    case SN_ERR_PARSE: return "parse";
    case SN_ERR_TOPOLOGY: return "topology";
    case SN_ERR_NUMERIC: return "numeric";
    case SN_ERR_STATE: return "state";
    case SN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void sn_string_free(char* s) { std::free(s); }

sn_status sn_run_stage(const char* stage, const char* config_json, char** summary_json) {
  if (summary_json) *summary_json = nullptr;
  const sn_status st = guard([&] {
    need(stage, "stage");
    const nlohmann::json cfg = config_json && *config_json ? nlohmann::json::parse(config_json) : nlohmann::json::object();
    const nlohmann::json summary = surfnet::run_stage(stage, cfg);
    if (summary_json) *summary_json = dup_string(summary.dump(2));
  });
  if (st != SN_OK && summary_json) {
    const nlohmann::json err = {{"stage", stage ? stage : ""},
                                {"status", "error"},
                                {"code", sn_status_name(st)},
                                {"message", g_last_error}};
    *summary_json = dup_string(err.dump(2));
  }
  return st;
}

sn_status sn_stage_names(char** names) {
  return guard([&] {
    need(names, "names");
    std::string s;
    for (const auto& n : surfnet::stage_names()) s += (s.empty() ? "" : " ") + n;
    *names = dup_string(s);
  });
}

sn_status sn_mesh_load(const char* obj_path, sn_mesh** out) {
  return guard([&] {
    need(obj_path, "path");
    need(out, "out");
    *out = new sn_mesh{surfnet::load_obj(obj_path)};
  });
}

sn_status sn_mesh_save(const sn_mesh* mesh, const char* obj_path) {
  return guard([&] {
    need(mesh, "mesh");
    need(obj_path, "path");
    surfnet::save_obj(mesh->mesh, obj_path);
  });
}

sn_status sn_mesh_counts(const sn_mesh* mesh, size_t* vertices, size_t* faces) {
  return guard([&] {
    need(mesh, "mesh");
    if (vertices) *vertices = mesh->mesh.vertices.size();
    if (faces) *faces = mesh->mesh.faces.size();
  });
}

sn_status sn_mesh_vertex(const sn_mesh* mesh, size_t index, double xyz[3]) {
  return guard([&] {
    need(mesh, "mesh");
    need(xyz, "xyz");
    surfnet::require(index < mesh->mesh.vertices.size(), surfnet::ErrorCode::InvalidArgument, "vertex index out of range");
    for (int k = 0; k < 3; ++k) xyz[k] = mesh->mesh.vertices[index][k];
  });
}

sn_status sn_mesh_genus(const sn_mesh* mesh, int* euler_characteristic, int* genus) {
  return guard([&] {
    need(mesh, "mesh");
    const surfnet::EulerInfo e = surfnet::euler_genus(mesh->mesh);
    if (euler_characteristic) *euler_characteristic = e.chi;
    if (genus) *genus = e.genus;
  });
}

void sn_mesh_free(sn_mesh* mesh) { delete mesh; }

sn_status sn_gim_load(const char* path, sn_gim** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sn_gim{surfnet::load_gim(path)};
  });
}

sn_status sn_gim_save(const sn_gim* gim, const char* path) {
  return guard([&] {
    need(gim, "gim");
    need(path, "path");
    surfnet::save_gim(gim->gim, path);
  });
}

sn_status sn_gim_shape(const sn_gim* gim, int* resolution, int* channels) {
  return guard([&] {
    need(gim, "gim");
    if (resolution) *resolution = gim->gim.resolution;
    if (channels) *channels = gim->gim.channels();
  });
}

sn_status sn_gim_get(const sn_gim* gim, int row, int col, int channel, double* value) {
  return guard([&] {
    need(gim, "gim");
    need(value, "value");
    const auto& g = gim->gim;
    surfnet::require(row >= 0 && col >= 0 && channel >= 0 && row < g.resolution && col < g.resolution &&
                         channel < g.channels(),
                     surfnet::ErrorCode::InvalidArgument, "pixel or channel out of range");
    *value = g.at(row, col, channel);
  });
}

sn_status sn_gim_decode(const sn_gim* gim, sn_mesh** out) {
  return guard([&] {
    need(gim, "gim");
    need(out, "out");
    *out = new sn_mesh{surfnet::decode_geometry_image(gim->gim)};
  });
}

void sn_gim_free(sn_gim* gim) { delete gim; }

sn_status sn_param_model_load(const char* dir, sn_param_model** out) {
  return guard([&] {
    need(dir, "dir");
    need(out, "out");
    *out = new sn_param_model{surfnet::load_param_model(dir)};
  });
}

sn_status sn_param_model_classes(const sn_param_model* model, int* classes) {
  return guard([&] {
    need(model, "model");
    need(classes, "classes");
    *classes = model->model.classes;
  });
}

sn_status sn_param_model_generate(sn_param_model* model, int class_index, double azimuth_deg, double elevation_deg,
                                  int zero_residual, sn_gim** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    const auto v = surfnet::ParamVector::one_hot(class_index, model->model.classes, azimuth_deg, elevation_deg);
    *out = new sn_gim{surfnet::generate_gim(model->model, v, zero_residual != 0)};
  });
}

void sn_param_model_free(sn_param_model* model) { delete model; }

}  // extern "C"
