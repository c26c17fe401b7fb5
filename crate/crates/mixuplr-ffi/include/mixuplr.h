#ifndef MIXUPLR_H
#define MIXUPLR_H

/* Generated by cbindgen from the mixuplr-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible call.
typedef enum MixuplrStatus {
  MIXUPLR_STATUS_OK = 0,
  // A required pointer argument was null.
  MIXUPLR_STATUS_NULL_ARGUMENT = 1,
  // Arguments or configuration outside the valid domain.
  MIXUPLR_STATUS_INVALID_ARGUMENT = 2,
  // File could not be read, written, or decoded.
  MIXUPLR_STATUS_IO_ERROR = 3,
  // The computation itself failed.
  MIXUPLR_STATUS_RUNTIME_ERROR = 4,
  // A panic was caught at the boundary.
  MIXUPLR_STATUS_PANIC = 5,
} MixuplrStatus;

// Opaque handle to a loaded model (architecture plus parameters).
typedef struct MixuplrModel MixuplrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message for this thread; valid until the next failing call on
// the same thread. Never null.
const char *mixuplr_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *mixuplr_version(void);

// Loads a model checkpoint. On success `*out` owns the handle; release it
// with `mixuplr_model_free`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MixuplrStatus mixuplr_model_load(const char *path, struct MixuplrModel **out);

// Writes the model to a checkpoint file.
//
// # Safety
// `model` must come from `mixuplr_model_load` and `path` must be a
// NUL-terminated string.
enum MixuplrStatus mixuplr_model_save(const struct MixuplrModel *model, const char *path);

// Releases a model handle; a null pointer is a no-op.
//
// # Safety
// `model` must be null or a pointer returned by `mixuplr_model_load` that
// has not been freed yet.
void mixuplr_model_free(struct MixuplrModel *model);

// # Safety
// `model` and `out` must be valid pointers.
enum MixuplrStatus mixuplr_model_input_dim(const struct MixuplrModel *model, size_t *out);

// # Safety
// `model` and `out` must be valid pointers.
enum MixuplrStatus mixuplr_model_output_dim(const struct MixuplrModel *model, size_t *out);

// Softmax class probabilities for a row-major batch of `n_rows x
// n_features` inputs. `out_probs` must hold `n_rows * output_dim` doubles.
//
// # Safety
// `model` must be a live handle; `features` and `out_probs` must point to
// buffers of the stated sizes.
enum MixuplrStatus mixuplr_model_predict_probs(const struct MixuplrModel *model,
                                               const double *features,
                                               size_t n_rows,
                                               size_t n_features,
                                               double *out_probs);

// Single-step FGSM adversarial examples against one-hot labels.
// `out_x_adv` must hold `n_rows * n_features` doubles.
//
// # Safety
// All pointers must reference buffers of the stated sizes.
enum MixuplrStatus mixuplr_model_fgsm(const struct MixuplrModel *model,
                                      const double *features,
                                      const double *labels_onehot,
                                      size_t n_rows,
                                      size_t n_features,
                                      size_t n_classes,
                                      double epsilon,
                                      double *out_x_adv);

// Sampled lower estimate of the model's Lipschitz constant (KL over
// softmax outputs against Euclidean inputs) over the domain spanned by the
// given points.
//
// # Safety
// `domain_points` must hold `n_points * n_features` doubles and `out_k_hat`
// must be a valid pointer.
enum MixuplrStatus mixuplr_model_estimate_lipschitz(const struct MixuplrModel *model,
                                                    const double *domain_points,
                                                    size_t n_points,
                                                    size_t n_features,
                                                    size_t n_pairs,
                                                    uint64_t seed,
                                                    double *out_k_hat);

// Runs one experiment command ("train", "ablate-zeta", "attack", "audit",
// "plot") against a config file, writing artifacts to `out_dir` (or the
// config's own output directory when null).
//
// # Safety
// `command` and `config_path` must be NUL-terminated strings; `out_dir`
// may be null.
enum MixuplrStatus mixuplr_run_command(const char *command,
                                       const char *config_path,
                                       const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXUPLR_H */
