#ifndef FACECOV_H
#define FACECOV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Expression classes, in manifest label order.
typedef enum {
  FC_LABEL_HAPPY = 0,
  FC_LABEL_SAD = 1,
  FC_LABEL_DISGUST = 2,
  FC_LABEL_SURPRISE = 3,
  FC_LABEL_FEAR = 4,
  FC_LABEL_ANGRY = 5,
  FC_LABEL_NEUTRAL = 6,
} FcLabel;

// Call outcome. Failure codes match the `facecov` CLI exit codes where the
// error families overlap.
typedef enum {
  FC_STATUS_OK = 0,
  // A required pointer argument was null.
  FC_STATUS_NULL_ARGUMENT = 1,
  // Bad argument value or configuration.
  FC_STATUS_INVALID_ARGUMENT = 2,
  // File format or I/O failure.
  FC_STATUS_FORMAT = 3,
  // Mesh geometry or surface patch failure.
  FC_STATUS_GEOMETRY = 4,
  // SPD math or covariance pooling failure.
  FC_STATUS_SPD = 5,
  // Codebook failure.
  FC_STATUS_CODEBOOK = 6,
  // Classifier failure.
  FC_STATUS_CLASSIFIER = 7,
  // Missing stream artifacts and other pipeline failures.
  FC_STATUS_PIPELINE = 8,
  // A Rust panic was caught at the boundary.
  FC_STATUS_INTERNAL = 9,
} FcStatus;

// Frozen BiMap weights with their dimension schedule and ReEig threshold.
typedef struct FcChain FcChain;

// A symmetric matrix. Operations that need positive definiteness check it.
typedef struct FcMatrix FcMatrix;

// Trained codebooks and classifier.
typedef struct FcModel FcModel;

// A feature tensor, usually `[c, h, w]`, stored as f32.
typedef struct FcTensor FcTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *fc_last_error_message(void);

// Library version, static storage.
const char *fc_version(void);

// Two-letter code (`HA`, `SA`, ...) of a label, static storage.
const char *fc_label_code(FcLabel label);

// Reads an FMAP file.
//
// # Safety
// `path` must be NUL-terminated and `out` writable.
FcStatus fc_tensor_read(const char *path, FcTensor **out);

// Builds a tensor from `ndim` dimensions and `data_len` values (their
// product).
//
// # Safety
// `dims` must hold `ndim` entries, `data` `data_len` entries; `out` must
// be writable.
FcStatus fc_tensor_new(const size_t *dims,
                       size_t ndim,
                       const float *data,
                       size_t data_len,
                       FcTensor **out);

// Rank of the tensor (0 for null). Copies up to `capacity` dimensions into
// `dims` when it is non-null.
//
// # Safety
// `tensor` must come from this library; `dims` must hold `capacity` entries.
size_t fc_tensor_dims(const FcTensor *tensor, size_t *dims, size_t capacity);

// # Safety
// `tensor` must come from this library (or be null) and is invalid afterwards.
void fc_tensor_free(FcTensor *tensor);

// Copies a `d x d` row-major symmetric matrix.
//
// # Safety
// `data` must hold `d * d` values; `out` must be writable.
FcStatus fc_matrix_new(size_t d, const double *data, FcMatrix **out);

// Side length of the matrix (0 for null).
//
// # Safety
// `m` must come from this library.
size_t fc_matrix_dim(const FcMatrix *m);

// Copies the matrix row-major into `data`, which holds `len >= d * d` values.
//
// # Safety
// `m` must come from this library and `data` must hold `len` values.
FcStatus fc_matrix_copy(const FcMatrix *m, double *data, size_t len);

// # Safety
// `m` must come from this library (or be null) and is invalid afterwards.
void fc_matrix_free(FcMatrix *m);

// Ridge-regularized covariance of the `c` channels over pixel rows
// `[row_begin, row_end)` and columns `[col_begin, col_end)` of a
// `[c, h, w]` tensor.
//
// # Safety
// `tensor` must come from this library; `out` must be writable.
FcStatus fc_pool_region(const FcTensor *tensor,
                        size_t row_begin,
                        size_t row_end,
                        size_t col_begin,
                        size_t col_end,
                        FcMatrix **out);

// [`fc_pool_region`] over the whole spatial extent.
//
// # Safety
// As for [`fc_pool_region`].
FcStatus fc_pool_global(const FcTensor *tensor, FcMatrix **out);

// Affine-invariant geodesic distance between two SPD matrices.
//
// # Safety
// `a` and `b` must come from this library; `out` must be writable.
FcStatus fc_affine_distance(const FcMatrix *a, const FcMatrix *b, double *out);

// Eigenvalue rectification: eigenvalues below `epsilon` are raised to it.
//
// # Safety
// `m` must come from this library; `out` must be writable.
FcStatus fc_reeig(const FcMatrix *m, double epsilon, FcMatrix **out);

// Matrix logarithm of an SPD matrix.
//
// # Safety
// `m` must come from this library; `out` must be writable.
FcStatus fc_logeig(const FcMatrix *m, FcMatrix **out);

// Chain with seeded orthonormal weights for the strictly decreasing
// schedule `dims[0] > dims[1] > ...`.
//
// # Safety
// `dims` must hold `ndims` entries; `out` must be writable.
FcStatus fc_chain_seeded(const size_t *dims,
                         size_t ndims,
                         double epsilon,
                         uint64_t seed,
                         FcChain **out);

// Loads a chain written by `facecov reduce --save-weights`.
//
// # Safety
// `dir` and `stem` must be NUL-terminated; `out` must be writable.
FcStatus fc_chain_load(const char *dir, const char *stem, FcChain **out);

// Output side length of the chain (0 for null).
//
// # Safety
// `chain` must come from this library.
size_t fc_chain_output_dim(const FcChain *chain);

// BiMap and ReEig per stage, then LogEig: an SPD input of the chain's input
// size becomes a symmetric log-domain matrix of its output size.
//
// # Safety
// `chain` and `m` must come from this library; `out` must be writable.
FcStatus fc_chain_reduce(const FcChain *chain, const FcMatrix *m, FcMatrix **out);

// # Safety
// `chain` must come from this library (or be null) and is invalid afterwards.
void fc_chain_free(FcChain *chain);

// Loads a model directory written by `facecov train`.
//
// # Safety
// `dir` must be NUL-terminated; `out` must be writable.
FcStatus fc_model_load(const char *dir, FcModel **out);

// Number of fused streams the model expects (0 for null).
//
// # Safety
// `model` must come from this library.
size_t fc_model_stream_count(const FcModel *model);

// Name of stream `index`, or null when out of range. Owned by the model.
//
// # Safety
// `model` must come from this library.
const char *fc_model_stream_name(const FcModel *model, size_t index);

// Classifies one sample from its raw artifacts. `paths[i]` is the file for
// stream `i` in model order: a mesh (OBJ or PLY) for the `shallow` stream,
// an FMAP tensor for every other stream.
//
// # Safety
// `model` must come from this library, `paths` must hold `npaths`
// NUL-terminated strings and `out` must be writable.
FcStatus fc_model_predict(const FcModel *model,
                          const char *const *paths,
                          size_t npaths,
                          FcLabel *out);

// # Safety
// `model` must come from this library (or be null) and is invalid afterwards.
void fc_model_free(FcModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FACECOV_H */
