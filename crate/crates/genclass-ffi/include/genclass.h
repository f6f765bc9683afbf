#ifndef GENCLASS_H
#define GENCLASS_H

/* Generated by cbindgen from the genclass-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI's exit classes.
 */
typedef enum GcStatus {
  /**
   * Success.
   */
  GC_STATUS_OK = 0,
  /**
   * Invalid configuration or arguments.
   */
  GC_STATUS_CONFIG = 1,
  /**
   * Data or file-format problem.
   */
  GC_STATUS_DATA = 2,
  /**
   * Numeric abort during training.
   */
  GC_STATUS_NUMERIC = 3,
  /**
   * Null pointer or malformed string argument.
   */
  GC_STATUS_NULL_ARGUMENT = 4,
} GcStatus;

/**
 * A loaded dataset (opaque).
 */
typedef struct GcDataset GcDataset;

/**
 * A trained model: generator, critic, and classifier (opaque).
 */
typedef struct GcModel GcModel;

/**
 * A training configuration (opaque).
 */
typedef struct GcTrainConfig GcTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty string if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *gc_last_error(void);

/**
 * Generates a synthetic dataset (see `gc_dataset_load` for real data).
 *
 * # Safety
 * `out` must be a valid pointer to a `GcDataset*` slot.
 */
enum GcStatus gc_dataset_synth(uintptr_t seen_classes,
                               uintptr_t unseen_classes,
                               uintptr_t attribute_dim,
                               uintptr_t feature_dim,
                               uintptr_t train_per_class,
                               uintptr_t test_per_class,
                               double noise_scale,
                               uint64_t seed,
                               struct GcDataset **out);

/**
 * Loads a dataset directory written in the on-disk manifest format.
 *
 * # Safety
 * `dir` must be a valid NUL-terminated string; `out` a valid slot.
 */
enum GcStatus gc_dataset_load(const char *dir, struct GcDataset **out);

/**
 * Frees a dataset handle; a null pointer is a no-op.
 *
 * # Safety
 * `dataset` must be null or a pointer from `gc_dataset_*`, freed once.
 */
void gc_dataset_free(struct GcDataset *dataset);

/**
 * Creates a training configuration with library defaults.
 *
 * # Safety
 * `out` must be a valid pointer to a `GcTrainConfig*` slot.
 */
enum GcStatus gc_train_config_new(struct GcTrainConfig **out);

/**
 * Sets one configuration key, using the same closed schema as config files
 * (e.g. "iterations", "learning_rate", "hidden_generator").
 *
 * # Safety
 * `config` must be a live handle; `key` and `value` valid strings.
 */
enum GcStatus gc_train_config_set(struct GcTrainConfig *config, const char *key, const char *value);

/**
 * Frees a configuration handle; a null pointer is a no-op.
 *
 * # Safety
 * `config` must be null or a pointer from `gc_train_config_new`, freed once.
 */
void gc_train_config_free(struct GcTrainConfig *config);

/**
 * Trains generator, critic, and classifier on the dataset.
 *
 * # Safety
 * `config` and `dataset` must be live handles; `out` a valid slot.
 */
enum GcStatus gc_train(const struct GcTrainConfig *config,
                       const struct GcDataset *dataset,
                       struct GcModel **out);

/**
 * Writes the model as a checkpoint directory.
 *
 * # Safety
 * `model` must be a live handle; `dir` a valid string.
 */
enum GcStatus gc_model_save(const struct GcModel *model, const char *dir);

/**
 * Loads a checkpoint directory written by `gc_model_save` or the CLI.
 *
 * # Safety
 * `dir` must be a valid string; `out` a valid slot.
 */
enum GcStatus gc_model_load(const char *dir, struct GcModel **out);

/**
 * Frees a model handle; a null pointer is a no-op.
 *
 * # Safety
 * `model` must be null or a pointer from `gc_train`/`gc_model_load`.
 */
void gc_model_free(struct GcModel *model);

/**
 * Zero-shot evaluation: mean per-class top-1 accuracy over unseen classes.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `accuracy` a valid slot.
 */
enum GcStatus gc_eval_zsl(const struct GcModel *model,
                          const struct GcDataset *dataset,
                          uintptr_t n_g,
                          uint64_t seed,
                          double *accuracy);

/**
 * Generalized zero-shot evaluation; writes U, S, and the harmonic mean H.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `u`, `s`, `h` valid slots.
 */
enum GcStatus gc_eval_gzsl(const struct GcModel *model,
                           const struct GcDataset *dataset,
                           uintptr_t n_g,
                           uint64_t seed,
                           double *u,
                           double *s,
                           double *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENCLASS_H */
