#ifndef ROBREL_H
#define ROBREL_H

/* Generated with cbindgen:0.26.0 */

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Which extreme of the policy gap.
 */
typedef enum RobrelDirection {
  ROBREL_DIRECTION_MIN = 0,
  ROBREL_DIRECTION_MAX = 1,
} RobrelDirection;

/**
 * Result of every fallible call.
 */
typedef enum RobrelStatus {
  ROBREL_STATUS_OK = 0,
  ROBREL_STATUS_NULL_POINTER = 1,
  ROBREL_STATUS_INVALID_UTF8 = 2,
  /**
   * The problem spec is malformed or references something missing.
   */
  ROBREL_STATUS_INVALID_SPEC = 3,
  ROBREL_STATUS_INVALID_ARGUMENT = 4,
  /**
   * No feasible reward on the oracle grid.
   */
  ROBREL_STATUS_INFEASIBLE = 5,
  ROBREL_STATUS_UNSUPPORTED = 6,
  ROBREL_STATUS_IO = 7,
  /**
   * A bug: the library panicked. The handle arguments are still valid.
   */
  ROBREL_STATUS_PANIC = 8,
} RobrelStatus;

/**
 * A validated problem spec, ready to solve.
 */
typedef struct RobrelProblem RobrelProblem;

/**
 * The outcome of [`robrel_solve`].
 */
typedef struct RobrelReport RobrelReport;

/**
 * Library version, a static NUL-terminated string.
 */
const char *robrel_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next library call on this thread.
 */
const char *robrel_last_error(void);

/**
 * Parses and validates a problem spec given as JSON text. Dataset paths in the
 * spec resolve against `base_dir`, or the working directory when it is NULL.
 *
 * # Safety
 * `json` and a non-NULL `base_dir` must be NUL-terminated strings; `out` must
 * be valid for a write.
 */
enum RobrelStatus robrel_problem_from_json(const char *json, const char *base_dir, struct RobrelProblem **out);

/**
 * Loads a problem spec file; dataset paths resolve against its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for a write.
 */
enum RobrelStatus robrel_problem_from_file(const char *path, struct RobrelProblem **out);

/**
 * # Safety
 * `problem` must be NULL or a handle from this library not yet freed.
 */
void robrel_problem_free(struct RobrelProblem *problem);

/**
 * Number of reward parameters (features, or `S*A*H` in tabular mode) and of constraints.
 *
 * # Safety
 * `problem` must be a live handle; the outputs must be valid for writes.
 */
enum RobrelStatus robrel_problem_dims(const struct RobrelProblem *problem, size_t *parameters, size_t *constraints);

/**
 * Hyperparameters the next solve will use.
 *
 * # Safety
 * `problem` must be a live handle; the outputs must be valid for writes.
 */
enum RobrelStatus robrel_problem_hyper(const struct RobrelProblem *problem, size_t *iters, double *alpha, double *dual_radius);

/**
 * Replaces the iteration count, step size and dual radius.
 *
 * # Safety
 * `problem` must be a live handle not used concurrently.
 */
enum RobrelStatus robrel_problem_set_hyper(struct RobrelProblem *problem, size_t iters, double alpha, double dual_radius);

/**
 * Runs both extremum solves.
 *
 * # Safety
 * `problem` must be a live handle and `out` valid for a write.
 */
enum RobrelStatus robrel_solve(const struct RobrelProblem *problem, struct RobrelReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle from this library not yet freed.
 */
void robrel_report_free(struct RobrelReport *report);

/**
 * Estimated extremes `m̂`, `M̂` and the robust prediction with its worst-case error.
 *
 * # Safety
 * `report` must be a live handle; non-NULL outputs must be valid for writes.
 * NULL outputs are skipped.
 */
enum RobrelStatus robrel_report_values(const struct RobrelReport *report, double *min, double *max, double *prediction, double *uninformativeness);

/**
 * Copies the averaged reward parameters of one extreme into `buf` (up to
 * `len` values) and stores the full count in `needed`. Call with `len = 0`
 * to query the size.
 *
 * # Safety
 * `report` must be a live handle, `buf` valid for `len` writes (may be NULL
 * when `len` is 0) and `needed` valid for a write.
 */
enum RobrelStatus robrel_report_reward(const struct RobrelReport *report, enum RobrelDirection direction, double *buf, size_t len, size_t *needed);

/**
 * The report as JSON; free the string with [`robrel_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` valid for a write.
 */
enum RobrelStatus robrel_report_json(const struct RobrelReport *report, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library not yet freed.
 */
void robrel_string_free(char *s);

/**
 * Exact extremes over the grid-feasible rewards at spacing `resolution`.
 *
 * # Safety
 * `problem` must be a live handle; the outputs must be valid for writes.
 */
enum RobrelStatus robrel_oracle(const struct RobrelProblem *problem, double resolution, double *min, double *max);

/**
 * `max(x - min, max - x)`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum RobrelStatus robrel_worst_case_loss(double x, double min, double max, double *out);

#endif /* ROBREL_H */
