use serde::{Deserialize, Serialize};

use super::solver::Bounds;
use super::CertifiedSolution;
use crate::cost::{own_cost, PeriodCost};
use crate::market::PriceFunction;
use crate::store::{FlowVector, StoreSpec};

/// Grid resolution for the per-period subproblem check.
pub const CERT_GRID: usize = 10_001;

/// Levels within this distance of a bound count as touching it.
pub const TOUCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Feasibility violation per level `S_0..S_T` and per flow, combined.
    pub feasibility: Vec<f64>,
    /// `C_t(x_t) - mu_t x_t` minus the best value found for the period.
    pub subproblem_gap: Vec<f64>,
    /// Multiplier-pattern violation between periods `t` and `t + 1`.
    pub slackness: Vec<f64>,
    pub max_residual: f64,
}

impl CertificateReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x))
}

/// Residuals of optimality conditions with the exact per-period minimum
/// taken from the cost's own response.
pub(crate) fn residuals<C: PeriodCost>(
    costs: &[C],
    b: &Bounds,
    flows: &[f64],
    mu: &[f64],
    grid: Option<usize>,
) -> CertificateReport {
    let n = flows.len();
    let mut feasibility = Vec::with_capacity(2 * n);
    let mut level = b.start;
    let mut levels = Vec::with_capacity(n);
    for (t, &x) in flows.iter().enumerate() {
        feasibility.push((x - b.rate_hi[t]).max(b.rate_lo[t] - x).max(0.0));
        level += x;
        levels.push(level);
        feasibility.push((level - b.level_hi[t]).max(b.level_lo[t] - level).max(0.0));
    }

    let mut gap = Vec::with_capacity(n);
    for t in 0..n {
        let c = &costs[t];
        let (lo, hi) = (b.rate_lo[t], b.rate_hi[t]);
        let obj = |x: f64| c.value(x) - mu[t] * x;
        let at = obj(flows[t]);
        let best = match grid {
            None => obj(c.response(mu[t], lo, hi).0),
            Some(g) => {
                let mut m = obj(lo).min(obj(hi));
                if lo < 0.0 && hi > 0.0 {
                    m = m.min(obj(0.0));
                }
                for i in 0..g {
                    let x = lo + (hi - lo) * i as f64 / (g - 1) as f64;
                    m = m.min(obj(x));
                }
                m
            }
        };
        gap.push((at - best).max(0.0));
    }

    let mut slackness = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        let (lo, hi) = (b.level_lo[t], b.level_hi[t]);
        let s = levels[t];
        let d = mu[t + 1] - mu[t];
        let at_lo = s <= lo + TOUCH_TOL;
        let at_hi = s >= hi - TOUCH_TOL;
        let v = match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => d.max(0.0),
            (false, true) => (-d).max(0.0),
            (false, false) => d.abs(),
        };
        slackness.push(v);
    }

    let max_residual = max_of(&feasibility)
        .max(max_of(&gap))
        .max(max_of(&slackness));
    CertificateReport {
        feasibility,
        subproblem_gap: gap,
        slackness,
        max_residual,
    }
}

/// Checks a solution against the optimality conditions independently of
/// the solver: feasibility, a fine-grid per-period subproblem check, and
/// the multiplier pattern at interior and boundary levels.
pub fn verify_certificate(
    spec: &StoreSpec,
    prices: &[PriceFunction],
    others: &FlowVector,
    sol: &CertifiedSolution,
    _tol: f64,
) -> CertificateReport {
    let n = prices.len();
    let b = Bounds::from_spec(spec, n);
    let flows = sol.schedule.flows();
    let mu = &sol.multipliers.mu;
    let mut rep = if flows.len() != n || mu.len() != n || others.len() != n {
        CertificateReport {
            feasibility: vec![f64::INFINITY],
            subproblem_gap: vec![],
            slackness: vec![],
            max_residual: f64::INFINITY,
        }
    } else {
        let costs: Option<Vec<_>> = prices
            .iter()
            .zip(&others.0)
            .map(|(pf, &k)| own_cost(pf, spec.efficiency, k, -spec.rate_out, spec.rate_in).ok())
            .collect();
        match costs {
            Some(c) => residuals(&c, &b, &flows.0, mu, Some(CERT_GRID)),
            None => CertificateReport {
                feasibility: vec![f64::INFINITY],
                subproblem_gap: vec![],
                slackness: vec![],
                max_residual: f64::INFINITY,
            },
        }
    };
    let start_err = (sol.schedule.levels[0] - spec.level_start).abs();
    rep.feasibility.insert(0, start_err);
    rep.max_residual = rep.max_residual.max(start_err);
    rep
}
