#ifndef SURFNET_SURFNET_H
#define SURFNET_SURFNET_H

#include <stddef.h>

#if defined(_WIN32)
#define SN_API __declspec(dllexport)
#else
#define SN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sn_status {
  SN_OK = 0,
  SN_ERR_INVALID_ARGUMENT = 1,
  SN_ERR_IO = 2,
  SN_ERR_PARSE = 3,
  SN_ERR_TOPOLOGY = 4,
  SN_ERR_NUMERIC = 5,
  SN_ERR_STATE = 6,
  SN_ERR_INTERNAL = 7
} sn_status;

typedef struct sn_mesh sn_mesh;
typedef struct sn_gim sn_gim;
typedef struct sn_param_model sn_param_model;

SN_API const char* sn_version(void);
/* Message of the last failed call on this thread; "" after a success. */
SN_API const char* sn_last_error(void);
SN_API const char* sn_status_name(sn_status status);
/* Frees strings returned through char** out-parameters. */
SN_API void sn_string_free(char* s);

/* Runs a pipeline stage. config_json is a JSON object of stage options.
 * On success *summary_json receives the JSON summary (free with
 * sn_string_free). On failure *summary_json, if summary_json is non-null,
 * receives {"stage", "status": "error", "code", "message"}. */
SN_API sn_status sn_run_stage(const char* stage, const char* config_json, char** summary_json);
/* Space-separated stage names; free with sn_string_free. */
SN_API sn_status sn_stage_names(char** names);

/* Meshes */
SN_API sn_status sn_mesh_load(const char* obj_path, sn_mesh** out);
SN_API sn_status sn_mesh_save(const sn_mesh* mesh, const char* obj_path);
SN_API sn_status sn_mesh_counts(const sn_mesh* mesh, size_t* vertices, size_t* faces);
SN_API sn_status sn_mesh_vertex(const sn_mesh* mesh, size_t index, double xyz[3]);
SN_API sn_status sn_mesh_genus(const sn_mesh* mesh, int* euler_characteristic, int* genus);
SN_API void sn_mesh_free(sn_mesh* mesh);

/* Geometry images */
SN_API sn_status sn_gim_load(const char* path, sn_gim** out);
SN_API sn_status sn_gim_save(const sn_gim* gim, const char* path);
SN_API sn_status sn_gim_shape(const sn_gim* gim, int* resolution, int* channels);
SN_API sn_status sn_gim_get(const sn_gim* gim, int row, int col, int channel, double* value);
/* Decodes the position channels into a closed triangle mesh. */
SN_API sn_status sn_gim_decode(const sn_gim* gim, sn_mesh** out);
SN_API void sn_gim_free(sn_gim* gim);

/* Parametric generators written by the train-param stage */
SN_API sn_status sn_param_model_load(const char* dir, sn_param_model** out);
SN_API sn_status sn_param_model_classes(const sn_param_model* model, int* classes);
SN_API sn_status sn_param_model_generate(sn_param_model* model, int class_index, double azimuth_deg,
                                         double elevation_deg, int zero_residual, sn_gim** out);
SN_API void sn_param_model_free(sn_param_model* model);

#ifdef __cplusplus
}
#endif

#endif
