use serde::{Deserialize, Serialize};

use super::{optimize_with_costs, own_costs, Bounds};
use crate::error::{Error, Result};
use crate::market::PriceFunction;
use crate::store::{store_cost, FlowVector, Schedule, StoreSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingResult {
    pub schedule: Schedule,
    pub profit: f64,
    pub windows: usize,
}

/// Plans over `window` periods, commits the first `commit`, and moves on.
/// Intermediate windows end free in `[0, E]` with stored energy valued at
/// zero; the last window ends at the required final level.
pub fn rolling_horizon(
    spec: &StoreSpec,
    prices: &[PriceFunction],
    window: usize,
    commit: usize,
) -> Result<RollingResult> {
    if commit == 0 || window < commit {
        return Err(Error::InvalidArgument("need 0 < commit <= window".into()));
    }
    let n = prices.len();
    let mut flows = Vec::with_capacity(n);
    let mut level = spec.level_start;
    let mut start = 0;
    let mut windows = 0;
    while start < n {
        let end = (start + window).min(n);
        let last = end == n;
        let mut ws = spec.clone();
        ws.level_start = level.clamp(0.0, spec.capacity);
        let seg = &prices[start..end];
        let costs = own_costs(&ws, seg, &FlowVector::zeros(seg.len()))?;
        let mut b = Bounds::from_spec(&ws, seg.len());
        if !last {
            b = b.with_free_end(spec.capacity);
        }
        let sol = optimize_with_costs(&costs, &b)?;
        let x = sol.flows().0;
        let take = if last { x.len() } else { commit.min(x.len()) };
        for &v in &x[..take] {
            level += v;
            flows.push(v);
        }
        start += take;
        windows += 1;
    }
    let fv = FlowVector(flows);
    let profit = -store_cost(&fv, &FlowVector::zeros(n), prices, spec.efficiency)?;
    Ok(RollingResult {
        schedule: Schedule::from_flows(spec.level_start, &fv),
        profit,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::optimize_single;

    #[test]
    fn whole_window_matches_full_solve() {
        let spec = StoreSpec::new(3.0, 1.0, 1.0, 0.9, 0.0, 0.0).unwrap();
        let prices: Vec<_> = [10.0, 30.0, 12.0, 28.0, 9.0, 35.0]
            .iter()
            .map(|&p| PriceFunction::linear(p, 0.5, (-5.0, 5.0)).unwrap())
            .collect();
        let full = optimize_single(&spec, &prices, &FlowVector::zeros(6)).unwrap();
        let r = rolling_horizon(&spec, &prices, 6, 2).unwrap();
        assert_eq!(r.windows, 1);
        assert!((r.profit - full.profit()).abs() < 1e-9);
    }

    #[test]
    fn short_windows_are_feasible() {
        let spec = StoreSpec::new(3.0, 1.0, 1.0, 0.9, 0.0, 0.0).unwrap();
        let prices: Vec<_> = (0..24)
            .map(|t| {
                let p = 20.0 + 10.0 * (t as f64 * 0.7).sin();
                PriceFunction::linear(p, 0.5, (-5.0, 5.0)).unwrap()
            })
            .collect();
        let r = rolling_horizon(&spec, &prices, 6, 3).unwrap();
        let f = crate::store::feasible(&spec, &r.schedule, 1e-9);
        assert!(f.ok, "{:?}", f.violations);
    }
}
