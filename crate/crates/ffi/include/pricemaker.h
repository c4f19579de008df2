#ifndef PRICEMAKER_H
#define PRICEMAKER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_POINTER = 1,
  PM_STATUS_INVALID_ARGUMENT = 2,
  PM_STATUS_DOMAIN = 3,
  PM_STATUS_INFEASIBLE = 4,
  PM_STATUS_UNBOUNDED = 5,
  PM_STATUS_NOT_CONVEX = 6,
  PM_STATUS_NO_CLEARING = 7,
  PM_STATUS_NUMERICAL = 8,
  PM_STATUS_BUFFER_TOO_SMALL = 9,
  PM_STATUS_OTHER = 10,
  PM_STATUS_PANIC = 11,
} PmStatus;

/**
 * A multi-store equilibrium.
 */
typedef struct PmEquilibrium PmEquilibrium;

/**
 * Per-period price functions.
 */
typedef struct PmPrices PmPrices;

/**
 * A certified single-store schedule.
 */
typedef struct PmSolution PmSolution;

/**
 * Store parameters, energy in MWh and rates in MWh per period.
 */
typedef struct PmStoreSpec {
  double capacity;
  double rate_in;
  double rate_out;
  double efficiency;
  double level_start;
  double level_end;
} PmStoreSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, valid until another
 * call fails on the same thread. Empty if nothing has failed.
 */
const char *pm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pm_version(void);

/**
 * Linear prices `pbar[t] + slope[t] * x` valid for `x` in `[lo, hi]`.
 *
 * # Safety
 * `pbar` and `slope` must point to `n` doubles; `out` must be writable.
 */
enum PmStatus pm_prices_new_linear(const double *pbar,
                                   const double *slope,
                                   size_t n,
                                   double lo,
                                   double hi,
                                   struct PmPrices **out);

/**
 * Proportional-impact prices `pbar[t] (1 + lambda x)` valid on `[lo, hi]`.
 *
 * # Safety
 * `pbar` must point to `n` doubles; `out` must be writable.
 */
enum PmStatus pm_prices_from_series(const double *pbar,
                                    size_t n,
                                    double lambda,
                                    double lo,
                                    double hi,
                                    struct PmPrices **out);

/**
 * # Safety
 * `p` must come from a `pm_prices_*` constructor and not be used afterwards.
 */
void pm_prices_free(struct PmPrices *p);

/**
 * # Safety
 * `p` must be a live prices handle or null.
 */
size_t pm_prices_len(const struct PmPrices *p);

/**
 * Profit-maximising schedule for one store alone in the market.
 *
 * # Safety
 * `prices` must be live, `spec` readable and `out` writable.
 */
enum PmStatus pm_optimize_single(const struct PmPrices *prices,
                                 const struct PmStoreSpec *spec,
                                 struct PmSolution **out);

/**
 * # Safety
 * `s` must be a live solution handle or null.
 */
void pm_solution_free(struct PmSolution *s);

/**
 * Number of periods `T`; flows have `T` entries and levels `T + 1`.
 *
 * # Safety
 * `s` must be a live solution handle or null.
 */
size_t pm_solution_horizon(const struct PmSolution *s);

/**
 * # Safety
 * `s` must be a live solution handle or null.
 */
double pm_solution_profit(const struct PmSolution *s);

/**
 * # Safety
 * `s` must be a live solution handle or null.
 */
double pm_solution_kkt_residual(const struct PmSolution *s);

/**
 * Copies the `T` signed flows (positive buys) into `buf`.
 *
 * # Safety
 * `s` must be live and `buf` writable for `len` doubles.
 */
enum PmStatus pm_solution_flows(const struct PmSolution *s, double *buf, size_t len);

/**
 * Copies the `T + 1` levels, starting with the initial level, into `buf`.
 *
 * # Safety
 * `s` must be live and `buf` writable for `len` doubles.
 */
enum PmStatus pm_solution_levels(const struct PmSolution *s, double *buf, size_t len);

/**
 * Cournot equilibrium of `n` stores trading against the same prices.
 *
 * # Safety
 * `prices` must be live, `specs` readable for `n` entries, `out` writable.
 */
enum PmStatus pm_nash(const struct PmPrices *prices,
                      const struct PmStoreSpec *specs,
                      size_t n,
                      struct PmEquilibrium **out);

/**
 * # Safety
 * `e` must be a live equilibrium handle or null.
 */
void pm_equilibrium_free(struct PmEquilibrium *e);

/**
 * 1 if the iteration met its stopping rule, 0 otherwise (or for null).
 *
 * # Safety
 * `e` must be a live equilibrium handle or null.
 */
int32_t pm_equilibrium_converged(const struct PmEquilibrium *e);

/**
 * # Safety
 * `e` must be a live equilibrium handle or null.
 */
double pm_equilibrium_br_residual(const struct PmEquilibrium *e);

/**
 * Copies the per-store profits into `buf`.
 *
 * # Safety
 * `e` must be live and `buf` writable for `len` doubles.
 */
enum PmStatus pm_equilibrium_profits(const struct PmEquilibrium *e, double *buf, size_t len);

/**
 * Copies the `T` flows of store `store` into `buf`.
 *
 * # Safety
 * `e` must be live and `buf` writable for `len` doubles.
 */
enum PmStatus pm_equilibrium_flows(const struct PmEquilibrium *e,
                                   size_t store,
                                   double *buf,
                                   size_t len);

/**
 * Optimal first-period purchase of an unconstrained two-period store.
 *
 * # Safety
 * `out` must be writable.
 */
enum PmStatus pm_two_period_unconstrained(double pbar1,
                                          double pbar2,
                                          double slope1,
                                          double slope2,
                                          double eps,
                                          double *out);

/**
 * Clears two periods with linear residual supplies `a_t + b_t p` and a
 * linear storage bid `bid_a + bid_b (p2 - p1)`, searching prices in
 * `[lo, hi]`.
 *
 * # Safety
 * `p1` and `p2` must be writable.
 */
enum PmStatus pm_clear_two_period_linear(double a1,
                                         double b1,
                                         double a2,
                                         double b2,
                                         double bid_a,
                                         double bid_b,
                                         double lo,
                                         double hi,
                                         double *p1,
                                         double *p2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRICEMAKER_H */
