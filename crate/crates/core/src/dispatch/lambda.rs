use serde::{Deserialize, Serialize};

use super::{optimize_single, CertifiedSolution};
use crate::error::{Error, Result};
use crate::market::PriceFunction;
use crate::store::{FlowVector, StoreSpec};

/// Distance to a bound under which a constraint counts as binding.
pub const BINDING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub lo: f64,
    pub hi: f64,
    pub rel_tol: f64,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        Self {
            lo: 1e-6,
            hi: 1e6,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaMax {
    /// Smallest impact factor without binding constraints, or `None` when
    /// constraints bind throughout the search range.
    pub lambda: Option<f64>,
    /// Final bracket: binding at `.0`, free at `.1`.
    pub bracket: (f64, f64),
}

/// Whether any rate bound or the capacity bound is active. The empty-store
/// bound is excluded: it binds at every impact factor whenever the store
/// starts or ends empty.
pub fn is_binding(spec: &StoreSpec, sol: &CertifiedSolution) -> bool {
    let x = sol.flows().0;
    let rates = x
        .iter()
        .any(|&v| v >= spec.rate_in - BINDING_TOL || v <= -spec.rate_out + BINDING_TOL);
    let lv = &sol.schedule.levels;
    let cap = lv[1..lv.len() - 1]
        .iter()
        .any(|&s| s >= spec.capacity - BINDING_TOL);
    rates || cap
}

fn family(base: &[f64], lambda: f64, reach: f64) -> Result<Vec<PriceFunction>> {
    base.iter()
        .map(|&p| PriceFunction::linear(p, lambda * p, (-reach, reach)))
        .collect()
}

fn binding_at(spec: &StoreSpec, base: &[f64], lambda: f64) -> Result<bool> {
    let reach = spec.rate_in.max(spec.rate_out);
    let prices = family(base, lambda, reach)?;
    let sol = optimize_single(spec, &prices, &FlowVector::zeros(base.len()))?;
    Ok(is_binding(spec, &sol))
}

/// Smallest impact factor of the family `pbar_t (1 + lambda x)` at which
/// the optimal schedule has no binding rate or capacity constraint,
/// located by geometric bisection.
pub fn find_lambda_max(spec: &StoreSpec, base: &[f64], search: LambdaSearch) -> Result<LambdaMax> {
    if base.is_empty() || base.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument(
            "base prices must be positive".into(),
        ));
    }
    if !(search.lo > 0.0 && search.hi > search.lo && search.rel_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "need 0 < lo < hi and rel_tol > 0".into(),
        ));
    }
    let p0 = base[0];
    if base.iter().all(|&p| p == p0) {
        return Ok(LambdaMax {
            lambda: Some(0.0),
            bracket: (0.0, 0.0),
        });
    }
    let (mut lo, mut hi) = (search.lo, search.hi);
    if binding_at(spec, base, hi)? {
        return Ok(LambdaMax {
            lambda: None,
            bracket: (hi, hi),
        });
    }
    if !binding_at(spec, base, lo)? {
        return Ok(LambdaMax {
            lambda: Some(lo),
            bracket: (lo, lo),
        });
    }
    while hi / lo - 1.0 > search.rel_tol {
        let m = (lo * hi).sqrt();
        if binding_at(spec, base, m)? {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(LambdaMax {
        lambda: Some(hi),
        bracket: (lo, hi),
    })
}
