#ifndef TSFACT_H
#define TSFACT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum TsfactStatus {
  TSFACT_STATUS_OK = 0,
  TSFACT_STATUS_NULL_POINTER = 1,
  TSFACT_STATUS_INVALID_ARGUMENT = 2,
  TSFACT_STATUS_DIMENSION = 3,
  TSFACT_STATUS_NON_FINITE = 4,
  TSFACT_STATUS_CONVERGENCE = 5,
  TSFACT_STATUS_CONFIG = 6,
  TSFACT_STATUS_STAGE_FAILED = 7,
  TSFACT_STATUS_DATA = 8,
  TSFACT_STATUS_NEGATIVE_ENTRY = 9,
  TSFACT_STATUS_NUMERIC = 10,
  TSFACT_STATUS_FORMAT = 11,
  TSFACT_STATUS_IO = 12,
  TSFACT_STATUS_PARSE = 13,
  TSFACT_STATUS_RESOURCE = 14,
  TSFACT_STATUS_PANIC = 15,
} TsfactStatus;

// Opaque execution context: a worker pool plus its run configuration.
typedef struct TsfactContext TsfactContext;

// Opaque dense matrix.
typedef struct TsfactMatrix TsfactMatrix;

// Runtime settings for [`tsfact_context_new`].
typedef struct TsfactConfig {
  size_t executors;
  size_t slots_per_executor;
  // Row blocks per input matrix; capped at the matrix's row count.
  size_t partitions;
  size_t tree_fanout;
  uint64_t seed;
} TsfactConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *tsfact_last_error(void);

// Default runtime settings: one executor with four slots, eight
// partitions, binary reduction tree, fixed seed.
struct TsfactConfig tsfact_config_default(void);

// Creates a matrix. `data` holds `rows * cols` row-major values, or is
// null for a zero matrix.
//
// # Safety
// `data`, when non-null, must point to `rows * cols` readable doubles.
// `out` must be a valid pointer to a handle slot.
enum TsfactStatus tsfact_matrix_new(size_t rows,
                                    size_t cols,
                                    const double *data,
                                    struct TsfactMatrix **out);

// # Safety
// `m` must be null or a handle from this library that is not used again.
void tsfact_matrix_free(struct TsfactMatrix *m);

// # Safety
// `m` must be null or a live matrix handle.
size_t tsfact_matrix_rows(const struct TsfactMatrix *m);

// # Safety
// `m` must be null or a live matrix handle.
size_t tsfact_matrix_cols(const struct TsfactMatrix *m);

// Copies the row-major entries into `out`, which has room for `len`
// doubles; `len` must equal rows * cols.
//
// # Safety
// `m` must be a live matrix handle and `out` must point to `len` writable doubles.
enum TsfactStatus tsfact_matrix_copy_data(const struct TsfactMatrix *m, double *out, size_t len);

// Reads a TSMA file.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid handle slot.
enum TsfactStatus tsfact_matrix_read(const char *path, struct TsfactMatrix **out);

// Writes a TSMA file.
//
// # Safety
// `m` must be a live matrix handle and `path` a nul-terminated string.
enum TsfactStatus tsfact_matrix_write(const struct TsfactMatrix *m, const char *path);

// Starts a worker pool. `config` may be null for the defaults.
//
// # Safety
// `config` must be null or point to a valid [`TsfactConfig`]; `out` must be a
// valid handle slot.
enum TsfactStatus tsfact_context_new(const struct TsfactConfig *config, struct TsfactContext **out);

// Stops the worker pool.
//
// # Safety
// `ctx` must be null or a handle from this library that is not used again.
void tsfact_context_free(struct TsfactContext *ctx);

// Number of stages the context has executed so far.
//
// # Safety
// `ctx` must be null or a live context handle.
size_t tsfact_context_stages(const struct TsfactContext *ctx);

// `R` factor of `a` by tree TSQR; `n x n`, nonnegative diagonal.
//
// # Safety
// `ctx` and `a` must be live handles; `r_out` a valid handle slot.
enum TsfactStatus tsfact_tsqr(const struct TsfactContext *ctx,
                              const struct TsfactMatrix *a,
                              struct TsfactMatrix **r_out);

// Rank-`k` PCA (`center != 0`) or truncated SVD (`center == 0`).
// Outputs `U` (m x k), `S` (k x 1) and `V` (n x k).
//
// # Safety
// `ctx` and `a` must be live handles; the output pointers valid handle slots.
enum TsfactStatus tsfact_pca(const struct TsfactContext *ctx,
                             const struct TsfactMatrix *a,
                             size_t k,
                             int32_t center,
                             double tol,
                             size_t max_iters,
                             struct TsfactMatrix **u_out,
                             struct TsfactMatrix **s_out,
                             struct TsfactMatrix **v_out);

// Rank-`k` separable NMF. Writes the `k` selected column ids to
// `selected` and outputs `W` (m x k) and `H` (k x n).
//
// # Safety
// `ctx` and `a` must be live handles, `selected` must have room for `k`
// values, and the output pointers must be valid handle slots.
enum TsfactStatus tsfact_nmf(const struct TsfactContext *ctx,
                             const struct TsfactMatrix *a,
                             size_t k,
                             size_t *selected,
                             struct TsfactMatrix **w_out,
                             struct TsfactMatrix **h_out);

// CX decomposition with `k` sampled columns. Writes the sampled column ids
// to `indices` and outputs `C` (m x k) and `X` (k x n).
//
// # Safety
// `ctx` and `a` must be live handles, `indices` must have room for `k`
// values, and the output pointers must be valid handle slots.
enum TsfactStatus tsfact_cx(const struct TsfactContext *ctx,
                            const struct TsfactMatrix *a,
                            size_t k,
                            size_t slack,
                            size_t power_iters,
                            uint64_t seed,
                            size_t *indices,
                            struct TsfactMatrix **c_out,
                            struct TsfactMatrix **x_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSFACT_H */
