/* C interface to the explicit-rate port controller. */

#ifndef ERICA_H
#define ERICA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum EricaStatus {
  /**
   * The call succeeded.
   */
  ERICA_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  ERICA_STATUS_NULL_POINTER = 1,
  /**
   * A controller parameter failed validation.
   */
  ERICA_STATUS_INVALID_PARAM = 2,
  /**
   * An argument was out of range (negative or NaN where not allowed,
   * or a cell travelling the wrong direction).
   */
  ERICA_STATUS_INVALID_ARGUMENT = 3,
} EricaStatus;

/**
 * Which way a cell is travelling relative to its source.
 */
typedef enum EricaDirection {
  ERICA_DIRECTION_FORWARD = 0,
  ERICA_DIRECTION_BACKWARD = 1,
} EricaDirection;

/**
 * Opaque per-port controller handle.
 */
typedef struct EricaController EricaController;

/**
 * Controller tunables. Obtain defaults from `erica_params_default` and
 * adjust fields before `erica_controller_new`.
 */
typedef struct EricaParams {
  /**
   * Half-width of the load band treated as unit load.
   */
  double delta;
  /**
   * Queue drain target in seconds of averaged ABR capacity.
   */
  double target_delay_t0;
  /**
   * Steepness of the drain hyperbola above the neutral queue point.
   */
  double hyper_a;
  /**
   * Steepness of the fill hyperbola at or below the neutral point.
   */
  double hyper_b;
  /**
   * Lower bound on the capacity fraction left to sources while draining.
   */
  double qdlf;
  /**
   * Per-interval multiplier for the activity of a silent VC.
   */
  double decay_factor;
  /**
   * Weight of the newest measurement in the exponential averages.
   */
  double alpha;
  /**
   * Measurement interval length in seconds.
   */
  double averaging_interval;
  /**
   * Lower bound on the effective VC count.
   */
  double activity_floor;
  /**
   * When false, `target_utilization` scales capacity and the queue is
   * ignored.
   */
  bool use_queue_control;
  /**
   * Capacity fraction used when `use_queue_control` is false.
   */
  double target_utilization;
} EricaParams;

/**
 * The RM-cell fields the controller reads and writes.
 */
typedef struct EricaRmCell {
  /**
   * Virtual circuit identifier.
   */
  uint32_t vc;
  enum EricaDirection direction;
  /**
   * Source current cell rate, cells/second.
   */
  double ccr;
  /**
   * Explicit rate, cells/second; switches only ever lower it.
   */
  double er;
} EricaRmCell;

/**
 * Quantities computed at an interval close, valid until the next close.
 */
typedef struct EricaIntervalOutputs {
  /**
   * Capacity offered to ABR traffic, cells/second.
   */
  double target_abr_capacity;
  /**
   * Averaged input rate over the target capacity.
   */
  double load_factor_z;
  /**
   * Equal split of the target capacity, cells/second.
   */
  double fair_share;
  /**
   * Largest grant of the previous interval, cells/second.
   */
  double max_alloc_previous;
  /**
   * Activity-weighted count of known VCs.
   */
  double effective_n;
} EricaIntervalOutputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default tunables (5 ms interval, queue control on).
 */
struct EricaParams erica_params_default(void);

/**
 * Create a controller for a port of `link_rate` cells/second.
 *
 * On success writes the new handle to `out` and returns `Ok`. The handle
 * must be released with `erica_controller_free`.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum EricaStatus erica_controller_new(const struct EricaParams *params,
                                      double link_rate,
                                      struct EricaController **out);

/**
 * Release a controller. A null handle is a no-op.
 *
 * # Safety
 * `ctl` must be a handle from `erica_controller_new` not yet freed.
 */
void erica_controller_free(struct EricaController *ctl);

/**
 * Register one ABR data cell of `vc` passing the port.
 *
 * # Safety
 * `ctl` must be a valid handle.
 */
enum EricaStatus erica_observe_cell(struct EricaController *ctl,
                                    uint32_t vc,
                                    enum EricaDirection direction);

/**
 * Register `cells` VBR cells serviced by the port since the last call.
 *
 * # Safety
 * `ctl` must be a valid handle.
 */
enum EricaStatus erica_observe_vbr_service(struct EricaController *ctl, uint64_t cells);

/**
 * Process a forward RM cell: counts as input and refreshes the VC's CCR.
 *
 * # Safety
 * `ctl` must be a valid handle and `cell` a valid pointer.
 */
enum EricaStatus erica_on_forward_rm(struct EricaController *ctl, const struct EricaRmCell *cell);

/**
 * Close the measurement interval with the port's current ABR queue length.
 * Writes the new interval outputs to `out` when it is non-null.
 *
 * # Safety
 * `ctl` must be a valid handle; `out` may be null.
 */
enum EricaStatus erica_close_interval(struct EricaController *ctl,
                                      double queue_length,
                                      struct EricaIntervalOutputs *out);

/**
 * Compute (or recall) this interval's grant for `vc`, cells/second.
 *
 * # Safety
 * `ctl` must be a valid handle and `er_out` a valid pointer.
 */
enum EricaStatus erica_compute_er(struct EricaController *ctl, uint32_t vc, double *er_out);

/**
 * Stamp feedback into a backward RM cell, lowering its ER field in place.
 *
 * # Safety
 * `ctl` must be a valid handle and `cell` a valid pointer.
 */
enum EricaStatus erica_on_backward_rm(struct EricaController *ctl, struct EricaRmCell *cell);

/**
 * Library version as a static NUL-terminated string.
 */
const char *erica_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERICA_H */
