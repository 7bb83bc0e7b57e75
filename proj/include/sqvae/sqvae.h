#ifndef SQVAE_SQVAE_H
#define SQVAE_SQVAE_H

/* C interface of the sqvae shared library.
 *
 * Every function returns a status code. On failure the message is available
 * from sqvae_last_error() until the next call on the same thread. Strings
 * handed out through char** parameters are owned by the caller and released
 * with sqvae_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SQVAE_API __declspec(dllexport)
#else
#define SQVAE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sqvae_status {
  SQVAE_OK = 0,
  SQVAE_ERR_CONFIG = 1,   /* invalid config document or usage */
  SQVAE_ERR_FORMAT = 2,   /* unreadable or malformed file */
  SQVAE_ERR_NUMERIC = 3,  /* non-finite value during training */
  SQVAE_ERR_CONTRACT = 4  /* violated precondition, internal failure */
} sqvae_status;

typedef struct sqvae_run sqvae_run;

typedef void (*sqvae_log_fn)(const char* line, void* user);

SQVAE_API const char* sqvae_version(void);
SQVAE_API const char* sqvae_last_error(void);
SQVAE_API void sqvae_string_free(char* s);

/* Default config with every field materialized. */
SQVAE_API sqvae_status sqvae_default_config(char** out_json);

/* Commands. log may be NULL. epochs < 0 keeps the configured count. */
SQVAE_API sqvae_status sqvae_cmd_train(const char* config_path, const char* resume_path, const char* out_dir,
                                       int64_t epochs, sqvae_log_fn log, void* user);
SQVAE_API sqvae_status sqvae_cmd_eval(const char* checkpoint_path, const char* split, char** out_json);
SQVAE_API sqvae_status sqvae_cmd_sweep(const char* grid_path, const char* out_dir, size_t parallel,
                                       sqvae_log_fn log, void* user);
SQVAE_API sqvae_status sqvae_cmd_plot(const char* const* csv_paths, size_t n_paths, const char* kind,
                                      const char* out_path);

/* Run handles: step through training in-process. */
SQVAE_API sqvae_status sqvae_run_create(const char* config_json, sqvae_run** out);
SQVAE_API sqvae_status sqvae_run_load(const char* checkpoint_path, sqvae_run** out);
SQVAE_API void sqvae_run_free(sqvae_run* run);
/* One epoch; the epoch metric row (CSV, no header) goes to out_row if non-NULL. */
SQVAE_API sqvae_status sqvae_run_train_epoch(sqvae_run* run, char** out_row);
SQVAE_API sqvae_status sqvae_run_evaluate(const sqvae_run* run, const char* split, char** out_json);
SQVAE_API sqvae_status sqvae_run_save(const sqvae_run* run, const char* checkpoint_path);
SQVAE_API sqvae_status sqvae_run_counters(const sqvae_run* run, uint64_t* epoch, uint64_t* step);

#ifdef __cplusplus
}
#endif

#endif
