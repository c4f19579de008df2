//! Single-store optimal scheduling with optimality certificates.

mod certificate;
mod horizon;
mod lambda;
mod sensitivity;
pub mod solver;

use serde::{Deserialize, Serialize};

use crate::cost::{own_cost, Cost, PeriodCost};
use crate::error::{Error, Result};
use crate::market::PriceFunction;
use crate::store::{FlowVector, Schedule, StoreSpec};

pub use certificate::{verify_certificate, CertificateReport, CERT_GRID, TOUCH_TOL};
pub use horizon::{rolling_horizon, RollingResult};
pub use lambda::{find_lambda_max, is_binding, LambdaMax, LambdaSearch, BINDING_TOL};
pub use sensitivity::{sensitivity_capacity, sensitivity_rate, RateSide, SensitivityReport};
pub use solver::{solve, Bounds, Solved};

/// Certificate tolerance in money per unit energy.
pub const CERT_TOL: f64 = 1e-8;

/// Marginal value of stored energy per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSolution {
    pub schedule: Schedule,
    pub multipliers: Multipliers,
    /// Total cost; the store's profit is its negation.
    pub objective: f64,
    pub kkt_residual: f64,
    /// The optimum is not unique; the minimum-norm flows were chosen.
    pub nonunique: bool,
}

impl CertifiedSolution {
    pub fn profit(&self) -> f64 {
        -self.objective
    }

    pub fn flows(&self) -> FlowVector {
        self.schedule.flows()
    }
}

impl Bounds {
    pub fn from_spec(spec: &StoreSpec, t: usize) -> Self {
        let mut level_lo = vec![0.0; t];
        let mut level_hi = vec![spec.capacity; t];
        if t > 0 {
            level_lo[t - 1] = spec.level_end;
            level_hi[t - 1] = spec.level_end;
        }
        Bounds {
            rate_lo: vec![-spec.rate_out; t],
            rate_hi: vec![spec.rate_in; t],
            level_lo,
            level_hi,
            start: spec.level_start,
            salvage: 0.0,
        }
    }

    /// Lets the final level float in `[0, capacity]`.
    pub fn with_free_end(mut self, capacity: f64) -> Self {
        if let Some(t) = self.len().checked_sub(1) {
            self.level_lo[t] = 0.0;
            self.level_hi[t] = capacity;
        }
        self
    }
}

/// Solves with arbitrary convex period costs and certifies the result.
pub fn optimize_with_costs<C: PeriodCost>(costs: &[C], b: &Bounds) -> Result<CertifiedSolution> {
    let sol = solve(costs, b)?;
    let rep = certificate::residuals(costs, b, &sol.flows, &sol.mu, None);
    let objective = costs.iter().zip(&sol.flows).map(|(c, &x)| c.value(x)).sum();
    let schedule = Schedule::from_flows(b.start, &FlowVector(sol.flows));
    Ok(CertifiedSolution {
        schedule,
        multipliers: Multipliers { mu: sol.mu },
        objective,
        kkt_residual: rep.max_residual,
        nonunique: sol.nonunique,
    })
}

/// Own-cost functions of one store facing companions' aggregate `others`.
pub fn own_costs(
    spec: &StoreSpec,
    prices: &[PriceFunction],
    others: &FlowVector,
) -> Result<Vec<Cost>> {
    if others.len() != prices.len() {
        return Err(Error::InvalidArgument(format!(
            "{} companion flows for {} periods",
            others.len(),
            prices.len()
        )));
    }
    prices
        .iter()
        .zip(&others.0)
        .map(|(pf, &k)| own_cost(pf, spec.efficiency, k, -spec.rate_out, spec.rate_in))
        .collect()
}

/// Profit-maximising schedule for one store given the companions'
/// aggregate market-side flows.
pub fn optimize_single(
    spec: &StoreSpec,
    prices: &[PriceFunction],
    others: &FlowVector,
) -> Result<CertifiedSolution> {
    spec.validate()?;
    if prices.is_empty() {
        return Err(Error::InvalidArgument("empty horizon".into()));
    }
    let costs = own_costs(spec, prices, others)?;
    optimize_with_costs(&costs, &Bounds::from_spec(spec, prices.len()))
}

/// Optimal first-period purchase of an unconstrained two-period store with
/// linear prices; the store sells `eps` times this amount in period two.
pub fn two_period_unconstrained(
    pbar1: f64,
    pbar2: f64,
    slope1: f64,
    slope2: f64,
    eps: f64,
) -> Result<f64> {
    if !(pbar1 > 0.0 && pbar2 > 0.0) {
        return Err(Error::InvalidArgument(
            "base prices must be positive".into(),
        ));
    }
    if slope1 < 0.0 || slope2 < 0.0 {
        return Err(Error::InvalidArgument("slopes must be nonnegative".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(
            "efficiency must lie in (0, 1]".into(),
        ));
    }
    let num = eps * pbar2 - pbar1;
    if num <= 0.0 {
        return Ok(0.0);
    }
    let den = 2.0 * (slope1 + eps * eps * slope2);
    if den == 0.0 {
        return Err(Error::Unbounded(
            "positive spread with perfectly elastic prices".into(),
        ));
    }
    Ok(num / den)
}
