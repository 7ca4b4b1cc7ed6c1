#ifndef MAXWELL_DD_H
#define MAXWELL_DD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum MddStatus {
  MDD_STATUS_OK = 0,
  MDD_STATUS_NULL_POINTER = 1,
  MDD_STATUS_INVALID_ARGUMENT = 2,
  MDD_STATUS_DIMENSION_MISMATCH = 3,
  /*
   A factorization met a zero pivot.
   */
  MDD_STATUS_SINGULAR = 4,
  /*
   Mesh, cover or coarse sizes are incompatible.
   */
  MDD_STATUS_INCOMPATIBLE_SIZES = 5,
  /*
   Absorption was zero where a factorized block needs it nonzero.
   */
  MDD_STATUS_ZERO_ABSORPTION = 6,
  /*
   A Rust panic was caught at the boundary.
   */
  MDD_STATUS_INTERNAL = 7,
} MddStatus;

typedef enum MddBoundary {
  MDD_BOUNDARY_PEC = 0,
  MDD_BOUNDARY_IMPEDANCE = 1,
} MddBoundary;

typedef enum MddKind {
  MDD_KIND_AS = 0,
  MDD_KIND_RAS = 1,
  MDD_KIND_HRAS = 2,
  MDD_KIND_HAS = 3,
  MDD_KIND_IMP_RAS = 4,
  MDD_KIND_IMP_HRAS = 5,
} MddKind;

/*
 Structured mesh of the unit cube.
 */
typedef struct MddMesh MddMesh;

typedef struct MddPreconditioner MddPreconditioner;

/*
 Assembled system and preconditioner matrices for one wavenumber.
 */
typedef struct MddProblem MddProblem;

/*
 GMRES settings.
 */
typedef struct MddGmresOptions {
  /*
   Stop when the residual falls below `tol` times the initial one.
   */
  double tol;
  size_t max_iter;
  /*
   Seed of the random initial guess; ignored when `zero_initial_guess`.
   */
  uint64_t seed;
  bool zero_initial_guess;
  /*
   Left preconditioning with the energy-weighted inner product instead
   of right preconditioning with the Euclidean one.
   */
  bool weighted;
} MddGmresOptions;

/*
 Outcome of a GMRES solve.
 */
typedef struct MddGmresReport {
  size_t iterations;
  double final_residual;
  bool converged;
} MddGmresReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer is
 valid until the next failing call on the same thread.
 */
const char *mdd_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mdd_version(void);

/*
 Builds an `n x n x n` cube mesh.

 # Safety
 `out` must be a valid pointer.
 */
enum MddStatus mdd_mesh_new(size_t n, struct MddMesh **out);

/*
 # Safety
 `mesh` must come from [`mdd_mesh_new`] and not be used afterwards.
 */
void mdd_mesh_free(struct MddMesh *mesh);

/*
 Vertex, tetrahedron and edge counts. Any output pointer may be null.

 # Safety
 `mesh` must be a live handle; non-null outputs must be valid.
 */
enum MddStatus mdd_mesh_counts(const struct MddMesh *mesh,
                               size_t *n_vertices,
                               size_t *n_tets,
                               size_t *n_edges);

/*
 Assembles the system with absorption `kappa_prob`, the preconditioner
 matrix with `kappa_prec`, and the Gaussian source. `n_coarse > 0` also
 builds a coarse space on an `n_coarse^3` mesh, which must nest in `mesh`.

 # Safety
 `mesh` must be a live handle and `out` a valid pointer.
 */
enum MddStatus mdd_problem_new(const struct MddMesh *mesh,
                               double k,
                               double kappa_prob,
                               double kappa_prec,
                               enum MddBoundary bc,
                               size_t n_coarse,
                               struct MddProblem **out);

/*
 # Safety
 `problem` must come from [`mdd_problem_new`] and not be used afterwards.
 */
void mdd_problem_free(struct MddProblem *problem);

/*
 Number of unknowns, or 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
size_t mdd_problem_dim(const struct MddProblem *problem);

/*
 Copies the assembled right-hand side into `out` (`2 * dim` doubles).

 # Safety
 `problem` must be a live handle and `out` must hold `2 * dim` doubles.
 */
enum MddStatus mdd_problem_rhs(const struct MddProblem *problem, double *out);

/*
 `y = A x` with the system matrix.

 # Safety
 `problem` must be a live handle; `x` and `y` must hold `2 * dim` doubles.
 */
enum MddStatus mdd_problem_apply(const struct MddProblem *problem, const double *x, double *y);

/*
 Builds a Schwarz preconditioner on an `n_sub^3` box cover with `layers`
 rings of overlap. `levels` is 1 or 2; two levels need a problem built
 with a coarse space.

 # Safety
 `problem` must be a live handle and `out` a valid pointer.
 */
enum MddStatus mdd_preconditioner_new(const struct MddProblem *problem,
                                      enum MddKind kind,
                                      uint32_t levels,
                                      size_t n_sub,
                                      size_t layers,
                                      struct MddPreconditioner **out);

/*
 # Safety
 `precond` must come from [`mdd_preconditioner_new`] and not be used
 afterwards.
 */
void mdd_preconditioner_free(struct MddPreconditioner *precond);

/*
 `z = M⁻¹ r`.

 # Safety
 `precond` must be a live handle; `r` and `z` must hold `2 * dim` doubles.
 */
enum MddStatus mdd_preconditioner_apply(const struct MddPreconditioner *precond,
                                        const double *r,
                                        double *z);

/*
 Default options: tolerance `1e-6`, 200 iterations, random initial guess
 with seed 0, right preconditioning.
 */
struct MddGmresOptions mdd_gmres_default_options(void);

/*
 Solves `A x = b` with GMRES. `precond` may be null for no preconditioner;
 `b` may be null to use the assembled right-hand side. `report` may be
 null. Non-convergence is reported in `report`, not as an error.

 # Safety
 `problem` must be a live handle, `precond` null or live, `b` null or
 `2 * dim` doubles, `x` `2 * dim` doubles, `report` null or valid.
 */
enum MddStatus mdd_gmres_solve(const struct MddProblem *problem,
                               const struct MddPreconditioner *precond,
                               const double *b,
                               struct MddGmresOptions options,
                               double *x,
                               struct MddGmresReport *report);

/*
 Convergence-factor bound after `m` iterations for overlap ratio `H/δ`.

 # Safety
 `out` must be a valid pointer.
 */
enum MddStatus mdd_theorem_bound(double h, double delta, uint32_t m, double *out);

/*
 Least-squares exponent `γ` with `ys ~ ks^γ`.

 # Safety
 `ks` and `ys` must hold `len` doubles; `gamma` must be valid.
 */
enum MddStatus mdd_fit_growth_exponent(const double *ks,
                                       const double *ys,
                                       size_t len,
                                       double *gamma);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAXWELL_DD_H */
