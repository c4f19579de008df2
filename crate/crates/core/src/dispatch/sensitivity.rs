use serde::{Deserialize, Serialize};

use super::{optimize_with_costs, own_costs, Bounds, CertifiedSolution};
use crate::error::{Error, Result};
use crate::market::PriceFunction;
use crate::store::{FlowVector, StoreSpec};

const CHANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateSide {
    In,
    Out,
}

/// Effect of relaxing one constraint at period `t0`. Intervals are
/// half-open period ranges `(a, b]`; `None` when nothing changed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub t0: usize,
    pub delta: f64,
    pub changed_interval_before: Option<(usize, usize)>,
    pub changed_interval_after: Option<(usize, usize)>,
    pub flow_deltas: Vec<f64>,
    pub objective_delta: f64,
    /// The perturbed constraint was binding in the base solution.
    pub base_binding: bool,
}

impl SensitivityReport {
    pub fn unchanged(&self) -> bool {
        self.changed_interval_before.is_none() && self.changed_interval_after.is_none()
    }
}

fn compare(
    t0: usize,
    delta: f64,
    base: &CertifiedSolution,
    new: &CertifiedSolution,
    base_binding: bool,
) -> SensitivityReport {
    let flow_deltas: Vec<f64> = new
        .flows()
        .0
        .iter()
        .zip(&base.flows().0)
        .map(|(a, b)| {
            let d = a - b;
            if d.abs() <= CHANGE_TOL {
                0.0
            } else {
                d
            }
        })
        .collect();
    // period t (1-based) is flow_deltas[t - 1]
    let changed: Vec<usize> = (1..=flow_deltas.len())
        .filter(|&t| flow_deltas[t - 1] != 0.0)
        .collect();
    let before: Vec<usize> = changed.iter().copied().filter(|&t| t <= t0).collect();
    let after: Vec<usize> = changed.iter().copied().filter(|&t| t > t0).collect();
    SensitivityReport {
        t0,
        delta,
        changed_interval_before: before.first().map(|&t| (t - 1, t0)),
        changed_interval_after: after.last().map(|&t| (t0, t)),
        flow_deltas,
        objective_delta: new.objective - base.objective,
        base_binding,
    }
}

/// Re-solves with the capacity at the end of period `t0` raised by `delta`.
pub fn sensitivity_capacity(
    spec: &StoreSpec,
    prices: &[PriceFunction],
    others: &FlowVector,
    t0: usize,
    delta: f64,
) -> Result<SensitivityReport> {
    let n = prices.len();
    if t0 == 0 || t0 >= n {
        return Err(Error::InvalidArgument(format!(
            "t0 = {t0} must satisfy 0 < t0 < {n}"
        )));
    }
    let costs = own_costs(spec, prices, others)?;
    let b = Bounds::from_spec(spec, n);
    let base = optimize_with_costs(&costs, &b)?;
    let mut pb = b.clone();
    pb.level_hi[t0 - 1] += delta;
    let new = optimize_with_costs(&costs, &pb)?;
    let lv = base.schedule.levels[t0];
    let binding = lv >= spec.capacity - super::BINDING_TOL;
    Ok(compare(t0, delta, &base, &new, binding))
}

/// Re-solves with the input or output rate of period `t0` raised by `delta`.
pub fn sensitivity_rate(
    spec: &StoreSpec,
    prices: &[PriceFunction],
    others: &FlowVector,
    t0: usize,
    side: RateSide,
    delta: f64,
) -> Result<SensitivityReport> {
    let n = prices.len();
    if t0 == 0 || t0 > n {
        return Err(Error::InvalidArgument(format!(
            "t0 = {t0} must satisfy 1 <= t0 <= {n}"
        )));
    }
    let costs = own_costs(spec, prices, others)?;
    let b = Bounds::from_spec(spec, n);
    let base = optimize_with_costs(&costs, &b)?;
    let mut pb = b.clone();
    let x = base.flows().0[t0 - 1];
    let binding = match side {
        RateSide::In => {
            pb.rate_hi[t0 - 1] += delta;
            x >= spec.rate_in - super::BINDING_TOL
        }
        RateSide::Out => {
            pb.rate_lo[t0 - 1] -= delta;
            x <= -spec.rate_out + super::BINDING_TOL
        }
    };
    // the relaxed period may trade beyond the rate the cost was built for
    let costs = if delta > 0.0 {
        let mut wide = spec.clone();
        match side {
            RateSide::In => wide.rate_in += delta,
            RateSide::Out => wide.rate_out += delta,
        }
        own_costs(&wide, prices, others)?
    } else {
        costs
    };
    let new = optimize_with_costs(&costs, &pb)?;
    Ok(compare(t0, delta, &base, &new, binding))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(pbar: f64, slope: f64) -> PriceFunction {
        PriceFunction::linear(pbar, slope, (-100.0, 100.0)).unwrap()
    }

    fn prices(p: &[f64]) -> Vec<PriceFunction> {
        p.iter().map(|&x| lin(x, 1.0)).collect()
    }

    #[test]
    fn interior_capacity_no_change() {
        let spec = StoreSpec::new(10.0, 10.0, 10.0, 1.0, 0.0, 0.0).unwrap();
        let p = prices(&[10.0, 20.0, 12.0, 22.0]);
        let r = sensitivity_capacity(&spec, &p, &FlowVector::zeros(4), 1, 0.01).unwrap();
        assert!(!r.base_binding);
        assert!(r.unchanged());
    }

    #[test]
    fn binding_capacity_two_intervals() {
        let spec = StoreSpec::new(1.0, 10.0, 10.0, 1.0, 0.0, 0.0).unwrap();
        let p = prices(&[10.0, 10.0, 30.0, 30.0]);
        let r = sensitivity_capacity(&spec, &p, &FlowVector::zeros(4), 2, 0.01).unwrap();
        assert!(r.base_binding);
        assert_eq!(r.changed_interval_before, Some((0, 2)));
        assert_eq!(r.changed_interval_after, Some((2, 4)));
        let before: f64 = r.flow_deltas[..2].iter().sum();
        let after: f64 = r.flow_deltas[2..].iter().sum();
        assert!(before > 0.0 && after < 0.0);
        assert!(r.objective_delta < 0.0);
    }

    #[test]
    fn zero_delta_identical() {
        let spec = StoreSpec::new(1.0, 10.0, 10.0, 1.0, 0.0, 0.0).unwrap();
        let p = prices(&[10.0, 10.0, 30.0, 30.0]);
        let r = sensitivity_capacity(&spec, &p, &FlowVector::zeros(4), 2, 0.0).unwrap();
        assert!(r.unchanged());
        let r = sensitivity_rate(&spec, &p, &FlowVector::zeros(4), 2, RateSide::In, 0.0).unwrap();
        assert!(r.unchanged());
    }

    #[test]
    fn rate_sensitivity() {
        let spec = StoreSpec::new(10.0, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let p = prices(&[10.0, 12.0, 30.0, 30.0]);
        let z = FlowVector::zeros(4);
        let r = sensitivity_rate(&spec, &p, &z, 1, RateSide::In, 0.01).unwrap();
        assert!(r.base_binding);
        assert!(r.flow_deltas[0] > 0.0 && r.flow_deltas[1] < 0.0);
        assert_eq!(r.changed_interval_after, Some((1, 2)));

        let spec = StoreSpec::new(10.0, 10.0, 10.0, 1.0, 0.0, 0.0).unwrap();
        let r = sensitivity_rate(&spec, &p, &z, 1, RateSide::In, 0.01).unwrap();
        assert!(!r.base_binding);
        assert!(r.unchanged());
    }

    #[test]
    fn t0_out_of_range() {
        let spec = StoreSpec::new(10.0, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let p = prices(&[10.0, 20.0]);
        assert!(sensitivity_capacity(&spec, &p, &FlowVector::zeros(2), 2, 0.1).is_err());
    }
}
