#ifndef MLMC_ABC_H
#define MLMC_ABC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum MlmcAbcStatus {
  MLMC_ABC_STATUS_OK = 0,
  MLMC_ABC_STATUS_NULL_POINTER = 1,
  MLMC_ABC_STATUS_INVALID_ARGUMENT = 2,
  MLMC_ABC_STATUS_DIMENSION_MISMATCH = 3,
  MLMC_ABC_STATUS_CONFIG = 4,
  MLMC_ABC_STATUS_PARSE = 5,
  MLMC_ABC_STATUS_NUMERICAL = 6,
  MLMC_ABC_STATUS_EMPTY_SAMPLES = 7,
  MLMC_ABC_STATUS_BUDGET_EXHAUSTED = 8,
  MLMC_ABC_STATUS_DEGENERACY = 9,
  MLMC_ABC_STATUS_IO = 10,
  MLMC_ABC_STATUS_BUFFER_TOO_SMALL = 11,
  MLMC_ABC_STATUS_PANIC = 12,
} MlmcAbcStatus;

/**
 * Opaque CDF estimate on a lattice.
 */
typedef struct MlmcAbcCdf MlmcAbcCdf;

/**
 * Opaque evaluation lattice.
 */
typedef struct MlmcAbcLattice MlmcAbcLattice;

/**
 * Opaque prior distribution.
 */
typedef struct MlmcAbcPrior MlmcAbcPrior;

/**
 * Opaque inference problem (model, observed data and discrepancy).
 */
typedef struct MlmcAbcProblem MlmcAbcProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mlmc_abc_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mlmc_abc_last_error(char *buf, size_t len);

/**
 * Parses a prior such as `"a ~ uniform(0, 5); b ~ normal(0, 1)"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_prior_parse(const char *spec, struct MlmcAbcPrior **out);

/**
 * Number of prior components, or 0 for a null handle.
 *
 * # Safety
 * `prior` must be null or a live handle.
 */
size_t mlmc_abc_prior_dim(const struct MlmcAbcPrior *prior);

/**
 * Prior density at `theta` (length `dim`).
 *
 * # Safety
 * `prior` must be a live handle, `theta` must hold `dim` values and `out`
 * must be writable.
 */
enum MlmcAbcStatus mlmc_abc_prior_density(const struct MlmcAbcPrior *prior,
                                          const double *theta,
                                          size_t dim,
                                          double *out);

/**
 * Releases a prior handle. Null is ignored.
 *
 * # Safety
 * `prior` must be null or a handle not yet freed.
 */
void mlmc_abc_prior_free(struct MlmcAbcPrior *prior);

/**
 * The SIS problem with the bundled observations.
 *
 * # Safety
 * `out` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_problem_sis(struct MlmcAbcProblem **out);

/**
 * The tuberculosis problem with the bundled cluster data. A zero
 * `max_infections` selects the default cap.
 *
 * # Safety
 * `out` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_problem_tb(uint64_t max_infections, struct MlmcAbcProblem **out);

/**
 * Simulates once at `theta` and writes the discrepancy to observed data.
 *
 * # Safety
 * `problem` must be a live handle, `theta` must hold `dim` values and
 * `out` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_problem_distance(const struct MlmcAbcProblem *problem,
                                             const double *theta,
                                             size_t dim,
                                             uint64_t seed,
                                             double *out);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void mlmc_abc_problem_free(struct MlmcAbcProblem *problem);

/**
 * Regular lattice with `nodes[j]` points from `lo[j]` to `hi[j]`.
 *
 * # Safety
 * `lo`, `hi` and `nodes` must each hold `dim` entries; `out` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_lattice_new(const double *lo,
                                        const double *hi,
                                        const size_t *nodes,
                                        size_t dim,
                                        struct MlmcAbcLattice **out);

/**
 * Total node count, or 0 for a null handle.
 *
 * # Safety
 * `lattice` must be null or a live handle.
 */
size_t mlmc_abc_lattice_len(const struct MlmcAbcLattice *lattice);

/**
 * # Safety
 * `lattice` must be null or a handle not yet freed.
 */
void mlmc_abc_lattice_free(struct MlmcAbcLattice *lattice);

/**
 * ABC rejection sampling: writes `n` samples row-major into `samples`
 * (`n * dim` values) and the simulation count into `cost`.
 *
 * # Safety
 * Handles must be live; `samples` must hold `n * dim` values; `cost` must
 * be writable.
 */
enum MlmcAbcStatus mlmc_abc_rejection(const struct MlmcAbcPrior *prior,
                                      const struct MlmcAbcProblem *problem,
                                      double epsilon,
                                      size_t n,
                                      uint64_t seed,
                                      double *samples,
                                      size_t dim,
                                      uint64_t *cost);

/**
 * Multilevel CDF estimate for thresholds `epsilons[0..levels]` with
 * `allocations[l]` samples on level `l`.
 *
 * # Safety
 * Handles must be live; arrays must hold `levels` entries; `out` and
 * `cost` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_estimate_cdf(const struct MlmcAbcPrior *prior,
                                         const struct MlmcAbcProblem *problem,
                                         const struct MlmcAbcLattice *lattice,
                                         const double *epsilons,
                                         const size_t *allocations,
                                         size_t levels,
                                         uint64_t seed,
                                         struct MlmcAbcCdf **out,
                                         uint64_t *cost);

/**
 * Number of values in a CDF estimate, or 0 for a null handle.
 *
 * # Safety
 * `cdf` must be null or a live handle.
 */
size_t mlmc_abc_cdf_len(const struct MlmcAbcCdf *cdf);

/**
 * Copies the node values (row-major, last axis fastest) into `out`.
 *
 * # Safety
 * `cdf` must be a live handle; `out` must hold `len` values.
 */
enum MlmcAbcStatus mlmc_abc_cdf_values(const struct MlmcAbcCdf *cdf, double *out, size_t len);

/**
 * Largest absolute node difference between two estimates on one lattice.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_cdf_sup_distance(const struct MlmcAbcCdf *a,
                                             const struct MlmcAbcCdf *b,
                                             double *out);

/**
 * # Safety
 * `cdf` must be null or a handle not yet freed.
 */
void mlmc_abc_cdf_free(struct MlmcAbcCdf *cdf);

/**
 * Runs an experiment from TOML or JSON text. `out_dir` and `cache_dir` may
 * be null. Writes the RMSE (NaN without a reference) and mean cost.
 *
 * # Safety
 * Strings must be NUL-terminated or null where allowed; `rmse` and
 * `mean_cost` must be writable.
 */
enum MlmcAbcStatus mlmc_abc_run_config(const char *config,
                                       const char *out_dir,
                                       const char *cache_dir,
                                       double *rmse,
                                       double *mean_cost);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLMC_ABC_H */
