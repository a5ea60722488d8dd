#ifndef SOURCE_SEEK_H
#define SOURCE_SEEK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SsStatus {
  SS_STATUS_OK = 0,
  // A required pointer argument was null.
  SS_STATUS_NULL_POINTER = 1,
  // An argument was out of range or not finite.
  SS_STATUS_INVALID_ARGUMENT = 2,
  // A configuration was malformed or inconsistent.
  SS_STATUS_CONFIG = 3,
  // A field was evaluated inside its exclusion zone.
  SS_STATUS_DOMAIN = 4,
  SS_STATUS_IO = 5,
  // An index was past the end of a trajectory.
  SS_STATUS_OUT_OF_RANGE = 6,
  // Internal failure; the call had no effect.
  SS_STATUS_PANIC = 7,
} SsStatus;

// Opaque extremum-seeking controller with its washout state.
typedef struct SsEscController SsEscController;

// Opaque scalar field.
typedef struct SsField SsField;

// Opaque closed-loop trajectory.
typedef struct SsTrajectory SsTrajectory;

typedef struct SsVec2 {
  double x;
  double y;
} SsVec2;

typedef struct SsPose {
  double z1;
  double z2;
  // Radians.
  double theta;
} SsPose;

typedef struct SsControl {
  double u;
  double omega;
} SsControl;

typedef struct SsEscParams {
  double a;
  double omega0;
  double h;
  double c_z1;
  double c_z2;
  double k1;
  double k2;
} SsEscParams;

// One recorded instant of a run.
typedef struct SsSample {
  double t;
  struct SsPose pose;
  struct SsControl control;
  // Field value at the pose.
  double j;
  // Gradient (or estimate) the controller used, world frame.
  struct SsVec2 grad;
} SsSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next call on the same thread.
const char *ss_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ss_version(void);

// `(g.y, −g.x)`: the gradient rotated by −90°.
struct SsVec2 ss_perp(struct SsVec2 g);

// `J = j_star − c1 (z1 − source.x)² − c2 (z2 − source.y)²`.
//
// # Safety
// `out` must be null or valid for writes.
enum SsStatus ss_field_quadratic(double j_star,
                                 double c1,
                                 double c2,
                                 struct SsVec2 source,
                                 struct SsField **out);

// `J = −z1² − (z2² − z1³)²`.
//
// # Safety
// `out` must be null or valid for writes.
enum SsStatus ss_field_nonquad_a(struct SsField **out);

// `J = −z1² − (z2 − z1²)²`.
//
// # Safety
// `out` must be null or valid for writes.
enum SsStatus ss_field_nonquad_b(struct SsField **out);

// Fan speed profile `v(R) = c[0] R⁴ + c[1] R³ + c[2] R² + c[3] R + c[4]`
// with `R = r_f / d`. Pass null `coeffs` for the lab fit.
//
// # Safety
// `coeffs` must be null or point to 5 doubles; `out` must be null or valid
// for writes.
enum SsStatus ss_field_fan(const double *coeffs,
                           double r_f,
                           struct SsVec2 source,
                           double d_min,
                           struct SsField **out);

// # Safety
// `field` must be null or a handle from an `ss_field_*` constructor that
// has not been freed.
void ss_field_free(struct SsField *field);

// # Safety
// `field` must be a live handle; `out` must be valid for writes.
enum SsStatus ss_field_eval(const struct SsField *field, struct SsVec2 p, double *out);

// # Safety
// `field` must be a live handle; `out` must be valid for writes.
enum SsStatus ss_field_gradient(const struct SsField *field, struct SsVec2 p, struct SsVec2 *out);

// One RK4 step of the unicycle under a held control.
//
// # Safety
// `out` must be valid for writes.
enum SsStatus ss_step(struct SsPose p, struct SsControl control, double dt, struct SsPose *out);

// Gradient-ascent control from a world-frame gradient.
//
// # Safety
// `out` must be valid for writes.
enum SsStatus ss_ga_control(struct SsVec2 grad,
                            double theta,
                            double k1,
                            double k2,
                            struct SsControl *out);

// # Safety
// `params` must be valid for reads; `out` must be valid for writes.
enum SsStatus ss_esc_new(const struct SsEscParams *params, struct SsEscController **out);

// # Safety
// `ctl` must be null or a live handle from [`ss_esc_new`].
void ss_esc_free(struct SsEscController *ctl);

// Feeds one measurement taken at time `t` and returns the control to hold
// for the next `dt`. `grad_estimate` may be null. The first call
// initializes the washout filter.
//
// # Safety
// `ctl` must be a live handle; `control` must be valid for writes;
// `grad_estimate` must be null or valid for writes.
enum SsStatus ss_esc_update(struct SsEscController *ctl,
                            double measurement,
                            double t,
                            double dt,
                            double theta,
                            struct SsControl *control,
                            struct SsVec2 *grad_estimate);

// Closed-loop gradient ascent with exact gradients from `t = 0` to
// `t_end`. Entering a fan's exclusion zone ends the run early; see
// [`ss_trajectory_exited_domain`].
//
// # Safety
// `field` must be a live handle; `out` must be valid for writes.
enum SsStatus ss_simulate_ga(const struct SsField *field,
                             double k1,
                             double k2,
                             struct SsPose init,
                             double dt,
                             double t_end,
                             struct SsTrajectory **out);

// Closed-loop extremum seeking from `t = 0` to `t_end`.
//
// # Safety
// `field` and `params` must be valid for reads; `out` must be valid for
// writes.
enum SsStatus ss_simulate_esc(const struct SsField *field,
                              const struct SsEscParams *params,
                              struct SsPose init,
                              double dt,
                              double t_end,
                              struct SsTrajectory **out);

// # Safety
// `traj` must be null or a live handle from an `ss_simulate_*` call.
void ss_trajectory_free(struct SsTrajectory *traj);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t ss_trajectory_len(const struct SsTrajectory *traj);

// # Safety
// `traj` must be a live handle; `out` must be valid for writes.
enum SsStatus ss_trajectory_sample(const struct SsTrajectory *traj,
                                   size_t index,
                                   struct SsSample *out);

// Whether the run stopped at a field's exclusion zone.
//
// # Safety
// `traj` must be a live handle; `out` must be valid for writes.
enum SsStatus ss_trajectory_exited_domain(const struct SsTrajectory *traj, bool *out);

// First time the distance to `source` falls to `fraction` of its initial
// value. `*settled` is false, and `*time` untouched, if it never does.
//
// # Safety
// `traj` must be a live handle; `settled` and `time` must be valid for
// writes.
enum SsStatus ss_trajectory_settling_time(const struct SsTrajectory *traj,
                                          struct SsVec2 source,
                                          double fraction,
                                          bool *settled,
                                          double *time);

// Runs a Monte-Carlo batch described by a TOML config and returns the
// summary as JSON in `*json`, to be released with [`ss_string_free`]. No
// files are written. `trials` of 0 keeps the config's trial count.
//
// # Safety
// `config_toml` must be a valid NUL-terminated string; `json` must be valid
// for writes.
enum SsStatus ss_run_config(const char *config_toml, size_t trials, uint64_t seed, char **json);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string from [`ss_run_config`] not yet freed.
void ss_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOURCE_SEEK_H */
