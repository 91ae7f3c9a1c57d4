/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DTK_H
#define DTK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call.
typedef enum DtkStatus {
  DTK_STATUS_OK = 0,
  DTK_STATUS_NULL_POINTER = 1,
  DTK_STATUS_INVALID_UTF8 = 2,
  DTK_STATUS_PARSE_ERROR = 3,
  DTK_STATUS_INVALID_CONFIG = 4,
  DTK_STATUS_PROVENANCE_MISMATCH = 5,
  DTK_STATUS_CAP_EXCEEDED = 6,
  DTK_STATUS_BUFFER_TOO_SMALL = 7,
  DTK_STATUS_ZERO_SELF_KERNEL = 8,
  DTK_STATUS_INTERNAL = 9,
} DtkStatus;

typedef enum DtkComposition {
  // Shuffled circular convolution.
  DTK_COMPOSITION_CONV = 0,
  // Shuffled γ-scaled element-wise product.
  DTK_COMPOSITION_PROD = 1,
} DtkComposition;

// Encoder: lexicon, composition operator and λ.
typedef struct DtkModel DtkModel;

// Parsed tree.
typedef struct DtkTree DtkTree;

// Distributed tree: a vector plus the configuration that produced it.
typedef struct DtkVector DtkVector;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an encoder. `dim` must be positive (powers of two are fast) and
// `lambda` in (0, 1].
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum DtkStatus dtk_model_new(size_t dim,
                             double lambda,
                             enum DtkComposition composition,
                             uint64_t seed,
                             struct DtkModel **out);

// # Safety
// `model` must be null or a pointer from [`dtk_model_new`] not yet freed.
void dtk_model_free(struct DtkModel *model);

// Parses a bracketed tree such as `(S (NP (D the) (N dog)) (VP (V ran)))`.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum DtkStatus dtk_tree_parse(const char *text, struct DtkTree **out);

// # Safety
// `tree` must be null or a pointer from [`dtk_tree_parse`] not yet freed.
void dtk_tree_free(struct DtkTree *tree);

// Number of nodes, or 0 for a null tree.
//
// # Safety
// `tree` must be null or a live tree handle.
size_t dtk_tree_node_count(const struct DtkTree *tree);

// Encodes `tree` with `model`.
//
// # Safety
// `model` and `tree` must be live handles; `out` must be writable.
enum DtkStatus dtk_distributed_tree(const struct DtkModel *model,
                                    const struct DtkTree *tree,
                                    struct DtkVector **out);

// Dimension of a vector, or 0 for null.
//
// # Safety
// `v` must be null or a live vector handle.
size_t dtk_vector_dim(const struct DtkVector *v);

// Copies the components into `buf`, which must hold at least `len`
// doubles; fails with `DTK_STATUS_BUFFER_TOO_SMALL` if `len` < dimension.
//
// # Safety
// `v` must be a live vector handle and `buf` valid for `len` writes.
enum DtkStatus dtk_vector_copy(const struct DtkVector *v, double *buf, size_t len);

// # Safety
// `v` must be null or a vector handle not yet freed.
void dtk_vector_free(struct DtkVector *v);

// Distributed tree kernel: the dot product of two vectors made by models
// with identical configuration.
//
// # Safety
// `a`, `b` must be live vector handles; `out` must be writable.
enum DtkStatus dtk_kernel(const struct DtkVector *a, const struct DtkVector *b, double *out);

// Cosine-normalized distributed tree kernel.
//
// # Safety
// As [`dtk_kernel`].
enum DtkStatus dtk_kernel_normalized(const struct DtkVector *a,
                                     const struct DtkVector *b,
                                     double *out);

// Exact tree kernel with decay `lambda`.
//
// # Safety
// `a`, `b` must be live tree handles; `out` must be writable.
enum DtkStatus dtk_tree_kernel(const struct DtkTree *a,
                               const struct DtkTree *b,
                               double lambda,
                               double *out);

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *dtk_last_error_message(void);

// Library version, a static NUL-terminated string.
const char *dtk_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DTK_H */
