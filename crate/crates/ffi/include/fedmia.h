#ifndef FEDMIA_H
#define FEDMIA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FedmiaStatus {
  FEDMIA_STATUS_OK = 0,
  FEDMIA_STATUS_INPUT = 1,
  FEDMIA_STATUS_CONFIG = 2,
  FEDMIA_STATUS_FORMAT = 3,
  FEDMIA_STATUS_NUMERIC = 4,
  FEDMIA_STATUS_SHAPE = 5,
  FEDMIA_STATUS_IO = 6,
  FEDMIA_STATUS_NULL_ARGUMENT = 7,
  FEDMIA_STATUS_PANIC = 8,
} FedmiaStatus;

// Experiment configuration handle.
typedef struct FedmiaConfig FedmiaConfig;

// Trained classifier handle.
typedef struct FedmiaModel FedmiaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fedmia_version(void);

// Message of the last failed call on this thread, or null if the last call
// succeeded. Valid until the next library call on the same thread.
const char *fedmia_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void fedmia_string_free(char *s);

// Reads a config file. Relative paths inside it resolve against its directory.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum FedmiaStatus fedmia_config_load(const char *path, struct FedmiaConfig **out);

// Parses config text. `base_dir` may be null, meaning the working directory.
//
// # Safety
// `text` and a non-null `base_dir` must be NUL-terminated strings; `out`
// must be writable.
enum FedmiaStatus fedmia_config_parse(const char *text,
                                      const char *base_dir,
                                      struct FedmiaConfig **out);

// Replaces the seed list of `config`.
//
// # Safety
// `config` must be a live handle and `seeds` must point to `n` values.
enum FedmiaStatus fedmia_config_set_seeds(struct FedmiaConfig *config,
                                          const uint64_t *seeds,
                                          uintptr_t n);

// # Safety
// `config` must be null or a handle not yet freed.
void fedmia_config_free(struct FedmiaConfig *config);

// Runs the sweep and returns the results CSV as a new string.
//
// # Safety
// `config` must be a live handle and `out_csv` writable. Free the string
// with [`fedmia_string_free`].
enum FedmiaStatus fedmia_run_experiment(const struct FedmiaConfig *config, char **out_csv);

// Runs the sweep and writes the results CSV to `path`.
//
// # Safety
// `config` must be a live handle and `path` a NUL-terminated string.
enum FedmiaStatus fedmia_run_experiment_to_file(const struct FedmiaConfig *config,
                                                const char *path);

// Loads a model checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum FedmiaStatus fedmia_model_load(const char *path, struct FedmiaModel **out);

// Writes `model` as a checkpoint.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum FedmiaStatus fedmia_model_save(const struct FedmiaModel *model, const char *path);

// # Safety
// `model` must be null or a handle not yet freed.
void fedmia_model_free(struct FedmiaModel *model);

// Input width and class count of `model`.
//
// # Safety
// `model` must be a live handle; the out-pointers must be writable.
enum FedmiaStatus fedmia_model_dims(const struct FedmiaModel *model,
                                    uintptr_t *input_dim,
                                    uintptr_t *class_count);

// Class probabilities for `rows` inputs of width `cols` (row-major).
//
// `out_probs` must hold `rows * class_count` values.
//
// # Safety
// `model` must be a live handle, `features` must point to `rows * cols`
// values and `out_probs` to `out_len` writable values.
enum FedmiaStatus fedmia_model_predict(const struct FedmiaModel *model,
                                       const double *features,
                                       uintptr_t rows,
                                       uintptr_t cols,
                                       double *out_probs,
                                       uintptr_t out_len);

// Batch-wise accuracy minus sample-wise accuracy; both must lie in `[0, 1]`.
//
// # Safety
// `out` must be writable.
enum FedmiaStatus fedmia_attacker_advantage(double batchwise, double samplewise, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDMIA_H */
