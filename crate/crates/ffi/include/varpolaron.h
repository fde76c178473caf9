#ifndef VARPOLARON_H
#define VARPOLARON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VpMethod {
  VP_METHOD_VARIATIONAL = 0,
  VP_METHOD_POLARON = 1,
  VP_METHOD_WEAK = 2,
} VpMethod;

typedef enum VpStatus {
  VP_STATUS_OK = 0,
  VP_STATUS_NULL_POINTER = 1,
  VP_STATUS_INVALID_ARGUMENT = 2,
  VP_STATUS_INVALID_NETWORK = 3,
  VP_STATUS_CONFIG = 4,
  VP_STATUS_NO_CONVERGENCE = 5,
  VP_STATUS_NUMERICAL = 6,
  VP_STATUS_IO = 7,
  // A run finished but some sweep points failed.
  VP_STATUS_PARTIAL_FAILURE = 8,
  VP_STATUS_PANIC = 9,
} VpStatus;

typedef struct VpBath VpBath;

typedef struct VpNetwork VpNetwork;

typedef struct VpTrajectory VpTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next `vp_*` call on the same thread.
const char *vp_last_error_message(void);

// Engine version as a static NUL-terminated string.
const char *vp_version(void);

// Network from `n` site energies and a row-major `n * n` symmetric coupling
// matrix with zero diagonal, all in cm^-1.
//
// # Safety
// `energies` must point to `n` doubles, `couplings` to `n * n` doubles.
enum VpStatus vp_network_new(const double *energies,
                             const double *couplings,
                             size_t n,
                             struct VpNetwork **out);

// The built-in seven-site FMO Hamiltonian.
//
// # Safety
// `out` must be a valid pointer.
enum VpStatus vp_network_fmo7(struct VpNetwork **out);

// Number of sites, or 0 for NULL.
//
// # Safety
// `net` must be NULL or a live handle.
size_t vp_network_n_sites(const struct VpNetwork *net);

// # Safety
// `net` must be NULL or a handle not yet freed.
void vp_network_free(struct VpNetwork *net);

// Per-site cubic-exponential densities (reorganization energy and cutoff in cm^-1).
//
// # Safety
// `lambda` and `omega_c` must point to `n` doubles.
enum VpStatus vp_bath_cubic(const double *lambda,
                            const double *omega_c,
                            size_t n,
                            double temperature_k,
                            struct VpBath **out);

// Per-site smooth FMO densities scaled by `eta`.
//
// # Safety
// `eta` must point to `n` doubles.
enum VpStatus vp_bath_fmo(const double *eta, size_t n, double temperature_k, struct VpBath **out);

// # Safety
// `bath` must be NULL or a handle not yet freed.
void vp_bath_free(struct VpBath *bath);

// Propagates from the pure state on `initial_site` (0-based).
//
// # Safety
// Handles must be live; `out` must be a valid pointer.
enum VpStatus vp_simulate(const struct VpNetwork *net,
                          const struct VpBath *bath,
                          enum VpMethod method,
                          size_t initial_site,
                          double dt_ps,
                          double t_max_ps,
                          struct VpTrajectory **out);

// Propagates from an explicit density matrix given as row-major real and
// imaginary parts (`rho_im` may be NULL for a real state).
//
// # Safety
// Handles must be live; `rho_re` (and `rho_im` if not NULL) must point to
// `n * n` doubles where n is the network size.
enum VpStatus vp_simulate_density(const struct VpNetwork *net,
                                  const struct VpBath *bath,
                                  enum VpMethod method,
                                  const double *rho_re,
                                  const double *rho_im,
                                  double dt_ps,
                                  double t_max_ps,
                                  struct VpTrajectory **out);

// Number of time nodes, or 0 for NULL.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t vp_trajectory_len(const struct VpTrajectory *traj);

// Number of sites, or 0 for NULL.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t vp_trajectory_n_sites(const struct VpTrajectory *traj);

// Copies the time nodes (ps) into `out`, which holds `len` doubles.
//
// # Safety
// `traj` must be live; `out` must point to `len` writable doubles.
enum VpStatus vp_trajectory_times(const struct VpTrajectory *traj, double *out, size_t len);

// Copies the lab-frame population of `site` (0-based) at every node.
//
// # Safety
// `traj` must be live; `out` must point to `len` writable doubles.
enum VpStatus vp_trajectory_populations(const struct VpTrajectory *traj,
                                        size_t site,
                                        double *out,
                                        size_t len);

// Copies the lab-frame density matrix at node `k` as row-major real and
// imaginary parts, `n * n` doubles each.
//
// # Safety
// `traj` must be live; `re` and `im` must each point to `n * n` writable doubles.
enum VpStatus vp_trajectory_state(const struct VpTrajectory *traj,
                                  size_t k,
                                  double *re,
                                  double *im);

// Copies the renormalization factors B_n of the frame used (`n` doubles).
//
// # Safety
// `traj` must be live; `out` must point to `n_sites` writable doubles.
enum VpStatus vp_trajectory_renormalization(const struct VpTrajectory *traj, double *out, size_t n);

// # Safety
// `traj` must be NULL or a handle not yet freed.
void vp_trajectory_free(struct VpTrajectory *traj);

// Runs every sweep point of a configuration document, writing CSVs and a
// manifest to `output_dir` (NULL keeps the document's `[output] dir`).
// `workers` = 0 uses every core. Returns `PartialFailure` if any point failed;
// `failures` (may be NULL) receives the count.
//
// # Safety
// `config` (and `output_dir` if not NULL) must be NUL-terminated strings.
enum VpStatus vp_run_config(const char *config,
                            const char *output_dir,
                            size_t workers,
                            size_t *failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VARPOLARON_H */
