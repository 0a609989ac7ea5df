#ifndef GFE_GFE_H
#define GFE_GFE_H

/* C interface to the gradient-flow encoding library.
 *
 * Every call returns a gfe_status. On failure, gfe_last_error() holds a
 * message for the calling thread until its next failing call. Handles are
 * opaque and owned by the caller; destroy functions accept NULL.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GFE_API __declspec(dllexport)
#else
#define GFE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gfe_status {
  GFE_OK = 0,
  GFE_ERR_USAGE = 1,     /* bad argument or call sequence */
  GFE_ERR_CONFIG = 2,    /* unknown key, malformed or out-of-range value */
  GFE_ERR_PARSE = 3,     /* malformed input file */
  GFE_ERR_IO = 4,        /* file could not be read or written */
  GFE_ERR_DIVERGED = 5,  /* non-finite latent state */
  GFE_ERR_INTERNAL = 6
} gfe_status;

typedef enum gfe_encoding {
  GFE_ENCODE_DEFAULT = 0, /* encoder for AE models, AMD solve otherwise */
  GFE_ENCODE_AMD = 1,
  GFE_ENCODE_ENCODER = 2
} gfe_encoding;

typedef enum gfe_split { GFE_SPLIT_TRAIN = 0, GFE_SPLIT_TEST = 1 } gfe_split;

typedef struct gfe_config gfe_config;
typedef struct gfe_dataset gfe_dataset;
typedef struct gfe_model gfe_model;

typedef struct gfe_run_summary {
  double final_val_loss;
  uint64_t images_seen;
  double wall_time_s;
  uint64_t skipped;
} gfe_run_summary;

GFE_API const char* gfe_last_error(void);
GFE_API const char* gfe_status_name(gfe_status status);

/* Configuration: flat key=value with dotted keys (flow.tau). */
GFE_API gfe_status gfe_config_create(gfe_config** out);
GFE_API gfe_status gfe_config_load(const char* path, gfe_config** out);
GFE_API gfe_status gfe_config_apply_text(gfe_config* cfg, const char* text);
GFE_API gfe_status gfe_config_set(gfe_config* cfg, const char* key, const char* value);
/* Copies the value with its terminator into buf when it fits; *needed is the
 * required size including the terminator. buf may be NULL when cap is 0. */
GFE_API gfe_status gfe_config_get(const gfe_config* cfg, const char* key, char* buf, size_t cap,
                                  size_t* needed);
GFE_API gfe_status gfe_config_validate(const gfe_config* cfg);
GFE_API gfe_status gfe_config_write_resolved(const gfe_config* cfg, const char* path);
GFE_API void gfe_config_destroy(gfe_config* cfg);

/* Datasets: MNIST-family IDX files. */
GFE_API gfe_status gfe_dataset_load_dir(const char* dir, gfe_split split, gfe_dataset** out);
GFE_API gfe_status gfe_dataset_load_idx(const char* images_path, const char* labels_path,
                                        gfe_split split, gfe_dataset** out);
/* Labels 0-4 into *low, 5-9 into *high. */
GFE_API gfe_status gfe_dataset_split_segmented(const gfe_dataset* ds, gfe_dataset** low,
                                               gfe_dataset** high);
GFE_API gfe_status gfe_dataset_head(const gfe_dataset* ds, size_t n, gfe_dataset** out);
GFE_API size_t gfe_dataset_size(const gfe_dataset* ds);
GFE_API void gfe_dataset_destroy(gfe_dataset* ds);

/* Models: decoder (plus encoder for the ae method) and optimizer state. */
GFE_API gfe_status gfe_model_create(const gfe_config* cfg, gfe_model** out);
GFE_API gfe_status gfe_model_load(const char* path, gfe_model** out);
GFE_API gfe_status gfe_model_save(const gfe_model* model, const char* path);
GFE_API gfe_status gfe_model_method(const gfe_model* model, char* buf, size_t cap, size_t* needed);
GFE_API size_t gfe_model_param_count(const gfe_model* model);
GFE_API void gfe_model_destroy(gfe_model* model);

/* Trains until the configured image budget is seen. metrics_path may be NULL. */
GFE_API gfe_status gfe_train(gfe_model* model, const gfe_dataset* train, const gfe_dataset* val,
                             const gfe_config* cfg, const char* metrics_path,
                             gfe_run_summary* summary);
/* Mean per-pixel cross-entropy of the reconstructions; limit 0 means all. */
GFE_API gfe_status gfe_evaluate(const gfe_model* model, const gfe_dataset* ds,
                                const gfe_config* cfg, gfe_encoding enc, size_t limit,
                                double* mean_loss);
GFE_API gfe_status gfe_dump_reconstructions(const gfe_model* model, const gfe_dataset* ds,
                                            const gfe_config* cfg, gfe_encoding enc,
                                            const char* dir, size_t limit);
GFE_API gfe_status gfe_dump_latents(const gfe_model* model, const gfe_dataset* ds,
                                    const gfe_config* cfg, gfe_encoding enc, const char* path,
                                    size_t limit);

/* Built-in numerical self-checks. The callback, if given, receives one line
 * per check; *failures counts failing checks. */
typedef void (*gfe_report_fn)(const char* name, int passed, const char* detail, void* user);
GFE_API gfe_status gfe_fixture_check(uint64_t seed, gfe_report_fn report, void* user,
                                     int* failures);

#ifdef __cplusplus
}
#endif

#endif
