/* C interface to the nonlocal balance-law toolkit: particle simulation of
 * measure dynamics dmu/dt + div(F mu) = G mu, adjoint (costate) solves,
 * Pontryagin residuals, and control optimization.
 *
 * All functions return NBC_OK on success; on failure they return an error
 * code and leave a message retrievable through nbc_last_error(). Out
 * parameters are written only on success. Every handle must be released with
 * the matching *_free (safe on NULL).
 */
#ifndef NBC_H
#define NBC_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nbc_status {
  NBC_OK = 0,
  NBC_ERR_INVALID = 2,    /* bad arguments, violated preconditions, bad files */
  NBC_ERR_NUMERICAL = 3,  /* non-finite state, solver failure */
  NBC_ERR_UNCONVERGED = 4 /* optimizer hit the iteration cap */
} nbc_status;

typedef struct nbc_model nbc_model;
typedef struct nbc_measure nbc_measure;
typedef struct nbc_control nbc_control;
typedef struct nbc_trajectory nbc_trajectory;
typedef struct nbc_costates nbc_costates;
typedef struct nbc_report nbc_report;

const char* nbc_version(void);
/* message from the most recent failing call on this thread ("" if none) */
const char* nbc_last_error(void);
void nbc_string_free(char* s);

/* ---- models ---- */

/* scalar benchmark: dx = u dt, dy = -u y dt, u in [-1,1], cost 0.5 int x^2 dmu */
nbc_status nbc_model_scalar_benchmark(nbc_model** out);

typedef struct nbc_opinion_params {
  int dim;              /* state dimension n >= 1 */
  double attraction;    /* alignment kernel scale */
  double decay;         /* Gaussian decay of the alignment kernel */
  double exchange;      /* skew-symmetric mass exchange scale */
  int control_drift;    /* nonzero: control adds to the velocity field */
  double control_lo;    /* control box bounds (per axis) */
  double control_hi;
} nbc_opinion_params;

nbc_status nbc_model_opinion(const nbc_opinion_params* params, nbc_model** out);
nbc_status nbc_model_dims(const nbc_model* model, int* dim, int* control_dim);
/* lo/hi: arrays of control_dim doubles */
nbc_status nbc_model_box(const nbc_model* model, double* lo, double* hi);
void nbc_model_free(nbc_model* model);

/* ---- measures ---- */

/* points: count*dim doubles, row-major; weights: count nonnegative doubles */
nbc_status nbc_measure_create(int dim, int count, const double* points, const double* weights,
                              nbc_measure** out);
nbc_status nbc_measure_dims(const nbc_measure* m, int* dim, int* count);
nbc_status nbc_measure_total_mass(const nbc_measure* m, double* out);
/* copies into caller buffers of size count*dim and count (either may be NULL) */
nbc_status nbc_measure_data(const nbc_measure* m, double* points, double* weights);
nbc_status nbc_measure_read_csv(const char* path, nbc_measure** out);
nbc_status nbc_measure_write_csv(const nbc_measure* m, const char* path);
/* exact 2-Wasserstein distance (equal-mass measures) */
nbc_status nbc_measure_w2(const nbc_measure* a, const nbc_measure* b, double* out);
/* exact flat norm of the difference a - b */
nbc_status nbc_measure_flat_distance(const nbc_measure* a, const nbc_measure* b, double* out);
void nbc_measure_free(nbc_measure* m);

/* ---- controls (piecewise constant on a uniform grid) ---- */

nbc_status nbc_control_create(int control_dim, int intervals, const double* values,
                              nbc_control** out);
nbc_status nbc_control_constant(int control_dim, int intervals, const double* value,
                                nbc_control** out);
nbc_status nbc_control_dims(const nbc_control* u, int* control_dim, int* intervals);
/* copies intervals*control_dim doubles */
nbc_status nbc_control_data(const nbc_control* u, double* values);
nbc_status nbc_control_read_csv(const char* path, nbc_control** out);
nbc_status nbc_control_write_csv(const nbc_control* u, double horizon, const char* path);
void nbc_control_free(nbc_control* u);

/* ---- forward simulation ---- */

/* method: "euler" or "rk4"; theta is the initial measure */
nbc_status nbc_simulate(const nbc_model* model, const nbc_measure* theta, const nbc_control* u,
                        double horizon, int steps, const char* method, nbc_trajectory** out);
nbc_status nbc_trajectory_nodes(const nbc_trajectory* traj, int* out); /* steps + 1 */
nbc_status nbc_trajectory_measure_at(const nbc_trajectory* traj, int node, nbc_measure** out);
nbc_status nbc_trajectory_cost(const nbc_model* model, const nbc_trajectory* traj, double* out);
nbc_status nbc_trajectory_write_csv(const nbc_trajectory* traj, const char* path);
nbc_status nbc_trajectory_write_moments_csv(const nbc_trajectory* traj, const char* path);
nbc_status nbc_trajectory_write_mass_csv(const nbc_trajectory* traj, const char* path);
void nbc_trajectory_free(nbc_trajectory* traj);

/* ---- adjoint ---- */

nbc_status nbc_adjoint_solve(const nbc_model* model, const nbc_control* u,
                             const nbc_trajectory* traj, nbc_costates** out);
nbc_status nbc_costates_write_csv(const nbc_trajectory* traj, const nbc_costates* c,
                                  const char* path);
nbc_status nbc_adjoint_summary_write_csv(const nbc_model* model, const nbc_control* u,
                                         const nbc_trajectory* traj, const nbc_costates* c,
                                         int u_grid, const char* path);
/* max over nodes of the Hamiltonian maximization defect on a u_grid-point grid */
nbc_status nbc_pmp_residual(const nbc_model* model, const nbc_control* u,
                            const nbc_trajectory* traj, const nbc_costates* c, int u_grid,
                            double* out);
void nbc_costates_free(nbc_costates* c);

/* ---- optimization ---- */

typedef struct nbc_opt_options {
  const char* method;    /* "msa" or "projected-gradient" (NULL: msa) */
  int max_iters;         /* <= 0: default 50 */
  double residual_tol;   /* <= 0: default 1e-8 */
  double cost_tol;       /* <= 0: default 1e-10 */
  double damping;        /* <= 0: default 1 */
  int u_grid;            /* <= 0: default 101 */
  double armijo_alpha0;  /* <= 0: default 1 */
  double armijo_shrink;  /* <= 0: default 0.5 */
  double armijo_c1;      /* <= 0: default 1e-4 */
  double min_step;       /* <= 0: default 1e-12 */
  const double* initial; /* control_dim doubles or NULL for the box midpoint */
} nbc_opt_options;

/* Returns NBC_ERR_UNCONVERGED when the iteration cap is reached; the report
 * is still produced in that case. */
nbc_status nbc_optimize(const nbc_model* model, const nbc_measure* theta, double horizon,
                        int steps, const char* method, const nbc_opt_options* options,
                        nbc_report** out);
nbc_status nbc_report_final_cost(const nbc_report* r, double* out);
nbc_status nbc_report_final_residual(const nbc_report* r, double* out);
nbc_status nbc_report_converged(const nbc_report* r, int* out);
/* borrowed pointers, valid until nbc_report_free */
const char* nbc_report_reason(const nbc_report* r);
const char* nbc_report_classification(const nbc_report* r);
nbc_status nbc_report_final_control(const nbc_report* r, nbc_control** out);
nbc_status nbc_report_write_json(const nbc_report* r, const char* path);
nbc_status nbc_report_write_control_csv(const nbc_report* r, double horizon, const char* path);
void nbc_report_free(nbc_report* r);

/* ---- validation suites ---- */

/* suite: derivatives | gradient | weak-form | hamiltonian-equivalence |
 * lipschitz-beta. theta may be NULL (seeded random measure). Renders a text
 * table into *table (free with nbc_string_free) and sets *all_passed. */
nbc_status nbc_check_run(const nbc_model* model, const nbc_measure* theta, double horizon,
                         int steps, const char* method, const char* suite, uint64_t seed,
                         int u_grid, char** table, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif /* NBC_H */
