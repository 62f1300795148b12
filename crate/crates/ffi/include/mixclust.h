#ifndef MIXCLUST_H
#define MIXCLUST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MIX_FAMILY_BERNOULLI 0

#define MIX_FAMILY_POISSON 1

#define MIX_METHOD_REFINE_RSPEC 0

#define MIX_METHOD_REFINE_SPLIT 1

#define MIX_METHOD_RSPEC 2

#define MIX_METHOD_M3SC 3

#define MIX_METHOD_LOO 4

#define MIX_SCALAR_BINOMIAL 0

#define MIX_SCALAR_POISSON 1

#define MIX_INIT_KMEANS 0

#define MIX_INIT_MOM 1

typedef enum MixStatus {
  MIX_STATUS_OK = 0,
  MIX_STATUS_NULL_POINTER = 1,
  MIX_STATUS_ARGUMENT = 2,
  MIX_STATUS_DATA = 3,
  MIX_STATUS_NUMERIC = 4,
  MIX_STATUS_DEGENERATE = 5,
  MIX_STATUS_IO = 6,
  MIX_STATUS_PANIC = 7,
} MixStatus;

/**
 * Result of [`mix_cluster`].
 */
typedef struct MixClustering MixClustering;

/**
 * Layer tensor, `d x d x n`.
 */
typedef struct MixTensor MixTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *mix_last_error_message(void);

/**
 * Builds a tensor from `nodes * nodes * layers` values, entry `(i, j, k)`
 * at offset `i + nodes * (j + nodes * k)`.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` must be writable.
 */
enum MixStatus mix_tensor_new(size_t nodes,
                              size_t layers,
                              const double *values,
                              size_t len,
                              struct MixTensor **out);

/**
 * Reads a `layer src dst [weight]` edge list.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum MixStatus mix_tensor_from_edge_list(const char *path,
                                         uint32_t family_code,
                                         struct MixTensor **out);

/**
 * Writes `[nodes, nodes, layers]` to `dims`.
 *
 * # Safety
 * `tensor` must come from this library; `dims` must hold 3 values.
 */
enum MixStatus mix_tensor_dims(const struct MixTensor *tensor, size_t *dims);

/**
 * # Safety
 * `tensor` must come from this library and not be used afterwards.
 */
void mix_tensor_free(struct MixTensor *tensor);

/**
 * Clusters the layers of `tensor` into two types with `k` communities.
 *
 * # Safety
 * `tensor` must come from this library and `out` must be writable.
 */
enum MixStatus mix_cluster(const struct MixTensor *tensor,
                           uint32_t family_code,
                           size_t k,
                           uint32_t method_code,
                           bool include_self_loops,
                           uint64_t seed,
                           struct MixClustering **out);

/**
 * Number of layers labeled.
 *
 * # Safety
 * `clustering` must come from this library.
 */
enum MixStatus mix_clustering_layers(const struct MixClustering *clustering, size_t *out);

/**
 * Copies the layer labels (0 or 1) into `labels`, which holds `len` values.
 *
 * # Safety
 * `clustering` must come from this library; `labels` must hold `len` values.
 */
enum MixStatus mix_clustering_layer_labels(const struct MixClustering *clustering,
                                           size_t *labels,
                                           size_t len);

/**
 * Copies the node communities of layer type `layer_type` (0 or 1).
 *
 * # Safety
 * `clustering` must come from this library; `communities` must hold `len`
 * values.
 */
enum MixStatus mix_clustering_memberships(const struct MixClustering *clustering,
                                          size_t layer_type,
                                          size_t *communities,
                                          size_t len);

/**
 * # Safety
 * `clustering` must come from this library and not be used afterwards.
 */
void mix_clustering_free(struct MixClustering *clustering);

/**
 * `(sqrt(theta1) - sqrt(theta2))^2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MixStatus mix_divergence_poisson_scalar(double theta1, double theta2, double *out);

/**
 * Divergence between `Bin(trials, p1)` and `Bin(trials, p2)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MixStatus mix_divergence_binomial(uint64_t trials, double p1, double p2, double *out);

/**
 * Misclustering rate of `z` against `z_star`, minimized over relabelings.
 *
 * # Safety
 * `z` and `z_star` must hold `n` values; `out` must be writable.
 */
enum MixStatus mix_hamming(const size_t *z, const size_t *z_star, size_t n, size_t k, double *out);

/**
 * Clusters `n` counts from a two-component Binomial or Poisson mixture.
 * `trials` is ignored for Poisson.
 *
 * # Safety
 * `counts` must hold `n` values and `labels` room for `n` values.
 */
enum MixStatus mix_cluster_scalar(const uint64_t *counts,
                                  size_t n,
                                  uint32_t model_code,
                                  uint64_t trials,
                                  uint32_t init_code,
                                  bool leave_one_out,
                                  uint64_t seed,
                                  size_t *labels);

/**
 * Library version, NUL-terminated and static.
 */
const char *mix_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXCLUST_H */
