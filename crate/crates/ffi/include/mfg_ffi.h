#ifndef MFG_FFI_H
#define MFG_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfgCouplingKind {
  MFG_COUPLING_KIND_ZERO = 0,
  MFG_COUPLING_KIND_CONVOLUTION = 1,
  MFG_COUPLING_KIND_EFFICIENT = 2,
  MFG_COUPLING_KIND_POTENTIAL = 3,
  MFG_COUPLING_KIND_XFREE_QUADRATIC = 4,
  MFG_COUPLING_KIND_XFREE_LINEAR = 5,
} MfgCouplingKind;

typedef enum MfgDamping {
  MFG_DAMPING_FIXED = 0,
  MFG_DAMPING_AVERAGING = 1,
  MFG_DAMPING_FICTITIOUS_PLAY = 2,
} MfgDamping;

typedef enum MfgField {
  /**
   * Density `m`, `levels * n` values.
   */
  MFG_FIELD_DENSITY = 0,
  /**
   * Value function `u`, `levels * n` values.
   */
  MFG_FIELD_VALUE = 1,
  /**
   * Face controls, `levels * n` values; entry `i` sits at `(i + 1/2) dx`.
   */
  MFG_FIELD_CONTROL = 2,
} MfgField;

typedef enum MfgPlannerMethod {
  MFG_PLANNER_METHOD_SYSTEM = 0,
  MFG_PLANNER_METHOD_DESCENT = 1,
} MfgPlannerMethod;

typedef enum MfgStatus {
  MFG_STATUS_OK = 0,
  MFG_STATUS_NULL_POINTER = 1,
  MFG_STATUS_INVALID_ARGUMENT = 2,
  MFG_STATUS_INVALID_GRID = 3,
  MFG_STATUS_INVALID_DENSITY = 4,
  MFG_STATUS_NUMERICAL = 5,
  MFG_STATUS_CONFIG = 6,
  MFG_STATUS_IO = 7,
  MFG_STATUS_BUFFER_TOO_SMALL = 8,
  MFG_STATUS_PANIC = 9,
} MfgStatus;

/**
 * Opaque problem handle.
 */
typedef struct MfgProblem MfgProblem;

/**
 * Opaque solution handle (equilibrium or planner).
 */
typedef struct MfgSolution MfgSolution;

/**
 * Problem on the periodic unit interval with the quadratic Hamiltonian and
 * initial density `1 + amplitude cos(2 pi x)` (normalized).
 */
typedef struct MfgProblemSpec {
  size_t n;
  size_t nt;
  double t0;
  double t_end;
  enum MfgCouplingKind coupling;
  double strength;
  /**
   * Kernel / moment frequency.
   */
  double frequency;
  enum MfgCouplingKind terminal;
  double terminal_strength;
  double amplitude;
} MfgProblemSpec;

typedef struct MfgSolverOptions {
  enum MfgDamping damping;
  /**
   * Used with `Fixed` only.
   */
  double delta;
  size_t max_iters;
  double tol;
} MfgSolverOptions;

typedef struct MfgSolveInfo {
  size_t iterations;
  int32_t converged;
  /**
   * Social cost for equilibria, planner cost for planner solutions.
   */
  double cost;
  double fp_residual;
  double hjb_residual;
  double fpk_residual;
} MfgSolveInfo;

typedef struct MfgReport {
  double cost_mfg;
  double cost_planner;
  double cost_planner_system;
  double gap;
  double lb_f;
  double lb_g;
  double ub_norm;
  double residual_f_sup;
  double residual_g_sup;
  double certificate;
  double epsilon;
  double duality_lhs;
  double duality_rhs;
  double duality_slack;
  /**
   * NaN unless the coupling is x-free.
   */
  double holder;
  int32_t converged;
} MfgReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static NUL-terminated string.
 */
const char *mfg_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *mfg_last_error_message(void);

struct MfgProblemSpec mfg_problem_spec_default(void);

struct MfgSolverOptions mfg_solver_options_default(void);

/**
 * # Safety
 * `spec` must point to a valid spec and `out` to writable storage.
 */
enum MfgStatus mfg_problem_new(const struct MfgProblemSpec *spec, struct MfgProblem **out);

/**
 * Builds the base point of a TOML experiment config (the sweep is ignored).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum MfgStatus mfg_problem_from_config(const char *path, struct MfgProblem **out);

/**
 * Replaces the initial density with `len == n` caller values.
 *
 * # Safety
 * `problem` must come from this library; `m0` must hold `len` doubles.
 */
enum MfgStatus mfg_problem_set_initial(struct MfgProblem *problem, const double *m0, size_t len);

/**
 * Grid size: points per level and number of time levels.
 *
 * # Safety
 * `problem` must come from this library; outputs may be null.
 */
enum MfgStatus mfg_problem_dims(const struct MfgProblem *problem, size_t *n, size_t *levels);

/**
 * # Safety
 * `problem` must come from [`mfg_problem_new`] or [`mfg_problem_from_config`] and not be used afterwards.
 */
void mfg_problem_free(struct MfgProblem *problem);

/**
 * Solves the equilibrium. `options` may be null for defaults. A solution
 * that did not converge is still returned, flagged in its info.
 *
 * # Safety
 * Pointers must be valid; `out` receives a handle to free with [`mfg_solution_free`].
 */
enum MfgStatus mfg_solve_mfg(const struct MfgProblem *problem,
                             const struct MfgSolverOptions *options,
                             struct MfgSolution **out);

/**
 * Solves the planner problem with the chosen method.
 *
 * # Safety
 * As for [`mfg_solve_mfg`].
 */
enum MfgStatus mfg_solve_planner(const struct MfgProblem *problem,
                                 const struct MfgSolverOptions *options,
                                 enum MfgPlannerMethod method,
                                 struct MfgSolution **out);

/**
 * # Safety
 * `solution` must come from this library; `info` must be writable.
 */
enum MfgStatus mfg_solution_info(const struct MfgSolution *solution, struct MfgSolveInfo *info);

/**
 * Copies a field, level-major, into `buf`. `BufferTooSmall` if
 * `len < levels * n`; the required length is always written to `written`
 * when it is not null.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum MfgStatus mfg_solution_copy(const struct MfgSolution *solution,
                                 enum MfgField field,
                                 double *buf,
                                 size_t len,
                                 size_t *written);

/**
 * # Safety
 * `solution` must come from this library and not be used afterwards.
 */
void mfg_solution_free(struct MfgSolution *solution);

/**
 * Full efficiency report with default descent settings and window.
 *
 * # Safety
 * Pointers must be valid; `options` may be null.
 */
enum MfgStatus mfg_report(const struct MfgProblem *problem,
                          const struct MfgSolverOptions *options,
                          struct MfgReport *out);

/**
 * Runs a TOML experiment (with its sweep) and writes the results file to
 * `out_path`, or to the config's `output` when `out_path` is null.
 * `all_converged` (may be null) receives 1 when every point converged.
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
enum MfgStatus mfg_run_config(const char *config_path,
                              const char *out_path,
                              int32_t *all_converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFG_FFI_H */
