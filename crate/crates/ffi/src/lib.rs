//! C interface to `pricemaker`.
//!
//! Objects cross the boundary as opaque handles created by `pm_*_new` or
//! solver calls and released with the matching `pm_*_free`. Every fallible
//! call returns a [`PmStatus`]; on failure `pm_last_error` describes the
//! cause for the calling thread.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pricemaker::dispatch::{optimize_single, two_period_unconstrained, CertifiedSolution};
use pricemaker::equilibrium::{
    nash_best_response, nash_linear, nash_symmetric, EquilibriumResult, MAX_SWEEPS,
};
use pricemaker::market::{clear_two_period, PriceFunction, ResidualSupply, SupplyBid};
use pricemaker::store::{FlowVector, StoreSpec};
use pricemaker::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Infeasible = 4,
    Unbounded = 5,
    NotConvex = 6,
    NoClearing = 7,
    Numerical = 8,
    BufferTooSmall = 9,
    Other = 10,
    Panic = 11,
}

/// Store parameters, energy in MWh and rates in MWh per period.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmStoreSpec {
    pub capacity: f64,
    pub rate_in: f64,
    pub rate_out: f64,
    pub efficiency: f64,
    pub level_start: f64,
    pub level_end: f64,
}

/// Per-period price functions.
pub struct PmPrices(Vec<PriceFunction>);

/// A certified single-store schedule.
pub struct PmSolution(CertifiedSolution);

/// A multi-store equilibrium.
pub struct PmEquilibrium(EquilibriumResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn status_of(e: &Error) -> PmStatus {
    match e {
        Error::InvalidArgument(_) | Error::Precondition(_) | Error::Config(_) => {
            PmStatus::InvalidArgument
        }
        Error::Domain { .. } => PmStatus::Domain,
        Error::Infeasible(_) => PmStatus::Infeasible,
        Error::Unbounded(_) => PmStatus::Unbounded,
        Error::NotConvex(_) => PmStatus::NotConvex,
        Error::NoClearing(_) | Error::DegenerateMarket(_) => PmStatus::NoClearing,
        Error::Numerical(_) => PmStatus::Numerical,
        _ => PmStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PmStatus>) -> PmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            PmStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, PmStatus>;
}

impl<T> OrStatus<T> for pricemaker::Result<T> {
    fn or_status(self) -> Result<T, PmStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

fn null(what: &str) -> PmStatus {
    set_error(format!("{what} is null"));
    PmStatus::NullPointer
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], PmStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), PmStatus> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(PmStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn spec_of(s: &PmStoreSpec) -> pricemaker::Result<StoreSpec> {
    StoreSpec::new(
        s.capacity,
        s.rate_in,
        s.rate_out,
        s.efficiency,
        s.level_start,
        s.level_end,
    )
}

/// Message for the last failed call on this thread, valid until another
/// call fails on the same thread. Empty if nothing has failed.
#[no_mangle]
pub extern "C" fn pm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    static V: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    V.as_ptr()
}

/// Linear prices `pbar[t] + slope[t] * x` valid for `x` in `[lo, hi]`.
///
/// # Safety
/// `pbar` and `slope` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_prices_new_linear(
    pbar: *const f64,
    slope: *const f64,
    n: usize,
    lo: f64,
    hi: f64,
    out: *mut *mut PmPrices,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let pbar = slice(pbar, n, "pbar")?;
        let slope = slice(slope, n, "slope")?;
        let pf = pbar
            .iter()
            .zip(slope)
            .map(|(&p, &s)| PriceFunction::linear(p, s, (lo, hi)))
            .collect::<pricemaker::Result<Vec<_>>>()
            .or_status()?;
        *out = Box::into_raw(Box::new(PmPrices(pf)));
        Ok(())
    })
}

/// Proportional-impact prices `pbar[t] (1 + lambda x)` valid on `[lo, hi]`.
///
/// # Safety
/// `pbar` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_prices_from_series(
    pbar: *const f64,
    n: usize,
    lambda: f64,
    lo: f64,
    hi: f64,
    out: *mut *mut PmPrices,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let pbar = slice(pbar, n, "pbar")?;
        if !(lambda >= 0.0) {
            set_error("lambda must be nonnegative");
            return Err(PmStatus::InvalidArgument);
        }
        let pf = pbar
            .iter()
            .map(|&p| PriceFunction::linear(p, lambda * p, (lo, hi)))
            .collect::<pricemaker::Result<Vec<_>>>()
            .or_status()?;
        *out = Box::into_raw(Box::new(PmPrices(pf)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from a `pm_prices_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pm_prices_free(p: *mut PmPrices) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live prices handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_prices_len(p: *const PmPrices) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// Profit-maximising schedule for one store alone in the market.
///
/// # Safety
/// `prices` must be live, `spec` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_optimize_single(
    prices: *const PmPrices,
    spec: *const PmStoreSpec,
    out: *mut *mut PmSolution,
) -> PmStatus {
    guard(|| {
        let prices = prices.as_ref().ok_or_else(|| null("prices"))?;
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = spec_of(spec).or_status()?;
        let sol =
            optimize_single(&spec, &prices.0, &FlowVector::zeros(prices.0.len())).or_status()?;
        *out = Box::into_raw(Box::new(PmSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_solution_free(s: *mut PmSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of periods `T`; flows have `T` entries and levels `T + 1`.
///
/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_solution_horizon(s: *const PmSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.schedule.horizon())
}

/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_solution_profit(s: *const PmSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.0.profit())
}

/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_solution_kkt_residual(s: *const PmSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.0.kkt_residual)
}

/// Copies the `T` signed flows (positive buys) into `buf`.
///
/// # Safety
/// `s` must be live and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_solution_flows(
    s: *const PmSolution,
    buf: *mut f64,
    len: usize,
) -> PmStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        write_out(&s.0.flows().0, buf, len)
    })
}

/// Copies the `T + 1` levels, starting with the initial level, into `buf`.
///
/// # Safety
/// `s` must be live and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_solution_levels(
    s: *const PmSolution,
    buf: *mut f64,
    len: usize,
) -> PmStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        write_out(&s.0.schedule.levels, buf, len)
    })
}

/// Cournot equilibrium of `n` stores trading against the same prices.
///
/// # Safety
/// `prices` must be live, `specs` readable for `n` entries, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_nash(
    prices: *const PmPrices,
    specs: *const PmStoreSpec,
    n: usize,
    out: *mut *mut PmEquilibrium,
) -> PmStatus {
    guard(|| {
        let prices = prices.as_ref().ok_or_else(|| null("prices"))?;
        if specs.is_null() {
            return Err(null("specs"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let specs = std::slice::from_raw_parts(specs, n)
            .iter()
            .map(spec_of)
            .collect::<pricemaker::Result<Vec<_>>>()
            .or_status()?;
        let res = match nash_symmetric(&specs, &prices.0).or_status()? {
            Some(r) => r,
            None if prices.0.iter().all(PriceFunction::is_linear) => {
                nash_linear(&specs, &prices.0).or_status()?
            }
            None => nash_best_response(&specs, &prices.0, None, None, MAX_SWEEPS).or_status()?,
        };
        *out = Box::into_raw(Box::new(PmEquilibrium(res)));
        Ok(())
    })
}

/// # Safety
/// `e` must be a live equilibrium handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_equilibrium_free(e: *mut PmEquilibrium) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// 1 if the iteration met its stopping rule, 0 otherwise (or for null).
///
/// # Safety
/// `e` must be a live equilibrium handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_equilibrium_converged(e: *const PmEquilibrium) -> i32 {
    e.as_ref().map_or(0, |e| e.0.converged as i32)
}

/// # Safety
/// `e` must be a live equilibrium handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_equilibrium_br_residual(e: *const PmEquilibrium) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.0.br_residual)
}

/// Copies the per-store profits into `buf`.
///
/// # Safety
/// `e` must be live and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_equilibrium_profits(
    e: *const PmEquilibrium,
    buf: *mut f64,
    len: usize,
) -> PmStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("equilibrium"))?;
        write_out(&e.0.profits, buf, len)
    })
}

/// Copies the `T` flows of store `store` into `buf`.
///
/// # Safety
/// `e` must be live and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_equilibrium_flows(
    e: *const PmEquilibrium,
    store: usize,
    buf: *mut f64,
    len: usize,
) -> PmStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("equilibrium"))?;
        let s = e.0.schedules.get(store).ok_or_else(|| {
            set_error(format!("store {store} out of range"));
            PmStatus::InvalidArgument
        })?;
        write_out(&s.flows().0, buf, len)
    })
}

/// Optimal first-period purchase of an unconstrained two-period store.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_two_period_unconstrained(
    pbar1: f64,
    pbar2: f64,
    slope1: f64,
    slope2: f64,
    eps: f64,
    out: *mut f64,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = two_period_unconstrained(pbar1, pbar2, slope1, slope2, eps).or_status()?;
        Ok(())
    })
}

/// Clears two periods with linear residual supplies `a_t + b_t p` and a
/// linear storage bid `bid_a + bid_b (p2 - p1)`, searching prices in
/// `[lo, hi]`.
///
/// # Safety
/// `p1` and `p2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_clear_two_period_linear(
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    bid_a: f64,
    bid_b: f64,
    lo: f64,
    hi: f64,
    p1: *mut f64,
    p2: *mut f64,
) -> PmStatus {
    guard(|| {
        if p1.is_null() || p2.is_null() {
            return Err(null("output price"));
        }
        let r1 = ResidualSupply::linear(a1, b1, (lo, hi)).or_status()?;
        let r2 = ResidualSupply::linear(a2, b2, (lo, hi)).or_status()?;
        let bid = if bid_a == 0.0 && bid_b == 0.0 {
            SupplyBid::Zero
        } else {
            SupplyBid::Linear {
                intercept: bid_a,
                slope: bid_b,
                floor_at_zero: false,
            }
        };
        let c = clear_two_period(&r1, &r2, &bid).or_status()?;
        *p1 = c.p1;
        *p2 = c.p2;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(
            status_of(&Error::Infeasible("x".into())),
            PmStatus::Infeasible
        );
        assert_eq!(
            status_of(&Error::Domain {
                x: 1.0,
                lo: 0.0,
                hi: 0.5
            }),
            PmStatus::Domain
        );
        let mut out = ptr::null_mut();
        let st = unsafe { pm_prices_new_linear(ptr::null(), ptr::null(), 2, -1.0, 1.0, &mut out) };
        assert_eq!(st, PmStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(pm_last_error()) };
        assert!(msg.to_str().unwrap().contains("pbar"));
    }

    #[test]
    fn version_string() {
        let v = unsafe { CStr::from_ptr(pm_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
