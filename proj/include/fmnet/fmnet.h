/* C interface of the fmnet shared library.
 *
 * Every entry point returns a status code; on failure a thread-local message
 * is available through fmnet_last_error(). Run entry points take a JSON
 * object of options mirroring the CLI flags (see README for the schemas).
 */
#ifndef FMNET_FMNET_H
#define FMNET_FMNET_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fmnet_status {
  FMNET_OK = 0,
  FMNET_ERR_RUNTIME = 1, /* I/O, state, shape, or numeric failure */
  FMNET_ERR_USAGE = 2    /* malformed options or invalid argument */
} fmnet_status;

const char* fmnet_version(void);

/* Message of the most recent failure on this thread; empty after success. */
const char* fmnet_last_error(void);

/* gen:    {"out", "seed", "overwrite", "h", "w", "t", "train_clips",
 *          "test_clips"}
 * train:  {"data", "out", "seed", "steps", "batch_clips", "save_every",
 *          "log_every", "sampling", "config": {...}}
 * eval:   {"data", "out", "checkpoint", "seed", "n", "retain", "infer_mask",
 *          "oracle_depth"}
 * ablate: {"data", "out", "mode", "seeds", "steps", "batch_clips",
 *          "config": {...}}
 */
fmnet_status fmnet_gen_run(const char* options_json);
fmnet_status fmnet_train_run(const char* options_json);
fmnet_status fmnet_eval_run(const char* options_json);
fmnet_status fmnet_ablate_run(const char* options_json);

typedef struct fmnet_dataset fmnet_dataset;

fmnet_status fmnet_dataset_open(const char* dir, fmnet_dataset** out);
fmnet_status fmnet_dataset_clip_count(const fmnet_dataset* ds,
                                      size_t* train_clips, size_t* test_clips);
void fmnet_dataset_free(fmnet_dataset* ds);

typedef struct fmnet_model fmnet_model;

/* config_json uses the same schema as the "config" block of train options. */
fmnet_status fmnet_model_create(const char* config_json, fmnet_model** out);
fmnet_status fmnet_model_load(const char* path, fmnet_model** out);
fmnet_status fmnet_model_save(const fmnet_model* model, const char* path);
fmnet_status fmnet_model_sequence_length(const fmnet_model* model, size_t* n);
void fmnet_model_free(fmnet_model* model);

#ifdef __cplusplus
}
#endif

#endif /* FMNET_FMNET_H */
