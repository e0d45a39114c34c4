#ifndef DENSITY_PLANNER_H
#define DENSITY_PLANNER_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  DP_STATUS_INVALID_ARGUMENT = 2,
  DP_STATUS_SINGULARITY = 3,
  DP_STATUS_INSIDE_UNSAFE = 4,
  DP_STATUS_NO_CONTACTS = 5,
  DP_STATUS_SINGULAR_CONFIGURATION = 6,
  DP_STATUS_DIMENSION_MISMATCH = 7,
  DP_STATUS_CONFIG_ERROR = 8,
  DP_STATUS_OUT_OF_RANGE = 9,
  DP_STATUS_PANIC = 10,
} DpStatus;

typedef enum DpTerminalStatus {
  DP_TERMINAL_STATUS_CONVERGED = 0,
  DP_TERMINAL_STATUS_MAX_STEPS = 1,
  DP_TERMINAL_STATUS_ENTERED_UNSAFE = 2,
} DpTerminalStatus;

// Opaque environment handle.
typedef struct DpEnvironment DpEnvironment;

// Opaque trajectory handle.
typedef struct DpTrajectory DpTrajectory;

typedef struct DpDensityParams {
  double alpha;
  double blend_inner;
  double blend_outer;
  double fd_step;
} DpDensityParams;

typedef struct DpPlannerConfig {
  double dt;
  double convergence_eps;
  uint64_t max_steps;
  double filter_beta;
  uint64_t filter_window;
} DpPlannerConfig;

typedef struct DpSample {
  double t;
  double x;
  double y;
  double ux;
  double uy;
  double clearance;
} DpSample;

typedef struct DpFoot {
  double position[3];
  bool in_contact;
} DpFoot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t dp_last_error_message(char *buf, size_t len);

struct DpDensityParams dp_density_params_default(void);

struct DpPlannerConfig dp_planner_config_default(void);

// Creates an obstacle-free environment.
//
// # Safety
// `out` must be a valid pointer.
enum DpStatus dp_environment_new(double xmin,
                                 double ymin,
                                 double xmax,
                                 double ymax,
                                 double target_x,
                                 double target_y,
                                 struct DpEnvironment **out);

// Loads the environment section of a TOML config; `params` and `cfg`, when
// non-null, receive the density and planner sections.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid pointer; `params`
// and `cfg` null or valid.
enum DpStatus dp_environment_from_config(const char *path,
                                         struct DpEnvironment **out,
                                         struct DpDensityParams *params,
                                         struct DpPlannerConfig *cfg);

// # Safety
// `env` must be a handle from this library.
enum DpStatus dp_environment_add_obstacle(struct DpEnvironment *env,
                                          double center_x,
                                          double center_y,
                                          double radius_unsafe,
                                          double radius_sense);

// Returns `Ok` for a well-formed environment, `InvalidArgument` otherwise.
//
// # Safety
// `env` must be a handle from this library.
enum DpStatus dp_environment_validate(const struct DpEnvironment *env);

// # Safety
// `env` must be null or a handle from this library not yet freed.
void dp_environment_free(struct DpEnvironment *env);

// # Safety
// All pointers must be valid.
enum DpStatus dp_density(const struct DpEnvironment *env,
                         const struct DpDensityParams *params,
                         double x,
                         double y,
                         double *out);

// Writes the analytic gradient to `out[0..2]`. Inside an unsafe ball the
// gradient is zero and `inside_unsafe` (if non-null) is set.
//
// # Safety
// `out` must hold two doubles; other pointers valid or, for
// `inside_unsafe`, null.
enum DpStatus dp_density_grad(const struct DpEnvironment *env,
                              const struct DpDensityParams *params,
                              double x,
                              double y,
                              double *out,
                              bool *inside_unsafe);

// # Safety
// `out` must hold two doubles; other pointers valid.
enum DpStatus dp_feedback_velocity(const struct DpEnvironment *env,
                                   const struct DpDensityParams *params,
                                   double x,
                                   double y,
                                   double *out);

// Integrates the feedback plan from `(x0, y0)`.
//
// # Safety
// All pointers must be valid.
enum DpStatus dp_plan(const struct DpEnvironment *env,
                      const struct DpDensityParams *params,
                      const struct DpPlannerConfig *cfg,
                      double x0,
                      double y0,
                      struct DpTrajectory **out);

// Number of samples; 0 for a null handle.
//
// # Safety
// `traj` must be null or a handle from this library.
size_t dp_trajectory_len(const struct DpTrajectory *traj);

// # Safety
// `traj` must be a handle from this library; `out` valid.
enum DpStatus dp_trajectory_status(const struct DpTrajectory *traj, enum DpTerminalStatus *out);

// # Safety
// `traj` must be a handle from this library; `out` valid.
enum DpStatus dp_trajectory_sample(const struct DpTrajectory *traj,
                                   size_t index,
                                   struct DpSample *out);

// # Safety
// `traj` must be null or a handle from this library not yet freed.
void dp_trajectory_free(struct DpTrajectory *traj);

// Distributes `wrench[0..6]` over `n_feet` feet; `out_forces` receives
// `3 * n_feet` doubles and `out_residual` (if non-null) the equilibrium
// residual.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum DpStatus dp_grf_distribute(const struct DpFoot *feet,
                                size_t n_feet,
                                double friction_mu,
                                const double *wrench,
                                double *out_forces,
                                double *out_residual);

// Joint accelerations of a planar two-link leg realizing the foot
// acceleration `(ax, ay)`; written to `out[0..2]`.
//
// # Safety
// `out` must hold two doubles.
enum DpStatus dp_leg_accel_solve(double l1,
                                 double l2,
                                 double q1,
                                 double q2,
                                 double qd1,
                                 double qd2,
                                 double ax,
                                 double ay,
                                 double *out);

// PID drive law over `n` joints; every array holds `n` doubles.
//
// # Safety
// All pointers must be valid for `n` doubles.
enum DpStatus dp_pid_torque(size_t n,
                            const double *tau_ff,
                            const double *q_star,
                            const double *qd_star,
                            const double *q,
                            const double *qd,
                            const double *kp,
                            const double *kd,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DENSITY_PLANNER_H */
