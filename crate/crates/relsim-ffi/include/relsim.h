/*
 * C interface to relsim: relational-similarity features from bipartite
 * patient-clinician visit graphs, plus the full synthetic-cohort pipeline.
 *
 * Conventions:
 *   - Functions returning a pointer return NULL on failure; functions
 *     returning RelsimStatus return RELSIM_STATUS_OK (0) on success. In
 *     both cases relsim_last_error() describes the most recent failure on
 *     the calling thread.
 *   - Every relsim_*_new/relsim_*_run constructor has a matching
 *     relsim_*_free; strings returned as char* are released with
 *     relsim_string_free.
 *   - Handles are not thread-safe; do not share one handle across threads
 *     without external synchronization.
 */

#ifndef RELSIM_H
#define RELSIM_H

/* Generated by the relsim-ffi build script; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a relsim call. `RELSIM_STATUS_OK` is zero; the nonzero codes
 * match the CLI's exit codes (1 usage, 2 data, 3 numerical), with
 * `RELSIM_STATUS_INTERNAL_ERROR` reserved for caught panics.
 */
typedef enum RelsimStatus {
  RELSIM_STATUS_OK = 0,
  RELSIM_STATUS_INVALID_ARGUMENT = 1,
  RELSIM_STATUS_DATA_ERROR = 2,
  RELSIM_STATUS_NUMERICAL_ERROR = 3,
  RELSIM_STATUS_INTERNAL_ERROR = 4,
} RelsimStatus;

/**
 * Result of a full pipeline run: hold-out PR-AUC and hits@k for the
 * baseline and the similarity-augmented model.
 */
typedef struct RelsimComparison RelsimComparison;

/**
 * Pipeline configuration; starts at the built-in defaults.
 */
typedef struct RelsimConfig RelsimConfig;

/**
 * Per-patient relational-similarity features extracted from an event log.
 */
typedef struct RelsimFeatures RelsimFeatures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the underlying relsim library as a static string.
 */
const char *relsim_version(void);

/**
 * Message for the most recent failure on the calling thread, or NULL if
 * the last call succeeded. The pointer stays valid until the next relsim
 * call on this thread.
 */
const char *relsim_last_error(void);

/**
 * Frees a string returned by a relsim call. NULL is a no-op.
 *
 * # Safety
 * `s` must have been returned by a relsim function documented to be freed
 * this way, and must not be used afterwards.
 */
void relsim_string_free(char *s);

/**
 * New configuration holding the built-in defaults. Free with
 * `relsim_config_free`.
 */
struct RelsimConfig *relsim_config_new(void);

/**
 * Sets one configuration key (same spelling as the CLI flags and config
 * files, e.g. "seed", "workdir", "k", "graphs").
 *
 * # Safety
 * `cfg` must be a live handle from `relsim_config_new`; `key` and
 * `value` must be NUL-terminated strings.
 */
enum RelsimStatus relsim_config_set(struct RelsimConfig *cfg, const char *key, const char *value);

/**
 * Applies a flat key=value config file on top of the current values.
 *
 * # Safety
 * `cfg` must be a live handle; `path` must be a NUL-terminated string.
 */
enum RelsimStatus relsim_config_load_file(struct RelsimConfig *cfg, const char *path);

/**
 * Renders the resolved configuration as key=value lines. Free the result
 * with `relsim_string_free`.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
char *relsim_config_render(const struct RelsimConfig *cfg);

/**
 * Frees a configuration handle. NULL is a no-op.
 *
 * # Safety
 * `cfg` must be NULL or a live handle, and must not be used afterwards.
 */
void relsim_config_free(struct RelsimConfig *cfg);

/**
 * Runs the whole pipeline (synth through compare) under `cfg`, writing
 * artifacts into the configured workdir. Returns the model comparison, or
 * NULL on failure. Free with `relsim_comparison_free`.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
struct RelsimComparison *relsim_run_all(const struct RelsimConfig *cfg);

/**
 * Hold-out PR-AUC of the baseline model; NaN if `cmp` is NULL.
 *
 * # Safety
 * `cmp` must be NULL or a live handle.
 */
double relsim_comparison_baseline_pr_auc(const struct RelsimComparison *cmp);

/**
 * Hold-out PR-AUC of the similarity-augmented model; NaN if `cmp` is NULL.
 *
 * # Safety
 * `cmp` must be NULL or a live handle.
 */
double relsim_comparison_proposed_pr_auc(const struct RelsimComparison *cmp);

/**
 * Number of precision@k rows in the comparison; 0 if `cmp` is NULL.
 *
 * # Safety
 * `cmp` must be NULL or a live handle.
 */
size_t relsim_comparison_n_rows(const struct RelsimComparison *cmp);

/**
 * Copies row `index` of the comparison into the out-parameters. The
 * improvement is a percentage relative to the baseline hit count, NaN
 * when the baseline has no hits. NULL out-parameters are skipped.
 *
 * # Safety
 * `cmp` must be a live handle; each non-NULL out-parameter must be valid
 * for writes.
 */
enum RelsimStatus relsim_comparison_row(const struct RelsimComparison *cmp,
                                        size_t index,
                                        size_t *k,
                                        size_t *baseline_hits,
                                        size_t *proposed_hits,
                                        double *improvement_pct);

/**
 * Renders the comparison as the same text table the CLI prints. Free with
 * `relsim_string_free`.
 *
 * # Safety
 * `cmp` must be a live handle.
 */
char *relsim_comparison_render(const struct RelsimComparison *cmp);

/**
 * Frees a comparison handle. NULL is a no-op.
 *
 * # Safety
 * `cmp` must be NULL or a live handle, and must not be used afterwards.
 */
void relsim_comparison_free(struct RelsimComparison *cmp);

/**
 * Builds one bipartite visit graph per role named in `graphs` (comma
 * separated, e.g. "diag,followup") from the event-log CSV at
 * `events_path`, restricted to visits in `[window_start, window_end)`,
 * and extracts `k` spectral-similarity values per graph for every patient
 * in the log. Patients without qualifying visits get zero rows.
 *
 * `tol`, `max_iter` and `seed` control the eigensolver; `tol` must be
 * positive and `max_iter` at least 1. Free the result with
 * `relsim_features_free`.
 *
 * # Safety
 * The four string arguments must be NUL-terminated strings.
 */
struct RelsimFeatures *relsim_extract_features(const char *events_path,
                                               const char *window_start,
                                               const char *window_end,
                                               const char *graphs,
                                               size_t k,
                                               double tol,
                                               size_t max_iter,
                                               uint64_t seed);

/**
 * Number of patients (rows); 0 if `feats` is NULL.
 *
 * # Safety
 * `feats` must be NULL or a live handle.
 */
size_t relsim_features_n_patients(const struct RelsimFeatures *feats);

/**
 * Values per row (number of graphs times k); 0 if `feats` is NULL.
 *
 * # Safety
 * `feats` must be NULL or a live handle.
 */
size_t relsim_features_dim(const struct RelsimFeatures *feats);

/**
 * Patient id of row `index`, or NULL when out of range. The pointer stays
 * valid while the handle lives.
 *
 * # Safety
 * `feats` must be a live handle.
 */
const char *relsim_features_patient_id(const struct RelsimFeatures *feats, size_t index);

/**
 * Copies row `index` into `out`, which must hold exactly
 * `relsim_features_dim` doubles.
 *
 * # Safety
 * `feats` must be a live handle; `out` must be valid for `out_len` writes.
 */
enum RelsimStatus relsim_features_row(const struct RelsimFeatures *feats,
                                      size_t index,
                                      double *out,
                                      size_t out_len);

/**
 * Frees a features handle. NULL is a no-op.
 *
 * # Safety
 * `feats` must be NULL or a live handle, and must not be used afterwards.
 */
void relsim_features_free(struct RelsimFeatures *feats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELSIM_H */
