//! Physical store model: specs, level schedules, the efficiency map and
//! feasibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{price_at, PriceFunction};

/// Default feasibility tolerance in energy units.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSpec {
    pub capacity: f64,
    pub rate_in: f64,
    pub rate_out: f64,
    pub efficiency: f64,
    pub level_start: f64,
    pub level_end: f64,
}

impl StoreSpec {
    pub fn new(
        capacity: f64,
        rate_in: f64,
        rate_out: f64,
        efficiency: f64,
        level_start: f64,
        level_end: f64,
    ) -> Result<Self> {
        let spec = Self {
            capacity,
            rate_in,
            rate_out,
            efficiency,
            level_start,
            level_end,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return bad("capacity must be positive");
        }
        if !(self.rate_in > 0.0 && self.rate_in.is_finite()) {
            return bad("rate_in must be positive");
        }
        if !(self.rate_out > 0.0 && self.rate_out.is_finite()) {
            return bad("rate_out must be positive");
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad("efficiency must lie in (0, 1]");
        }
        if !(0.0..=self.capacity).contains(&self.level_start) {
            return bad("level_start must lie in [0, capacity]");
        }
        if !(0.0..=self.capacity).contains(&self.level_end) {
            return bad("level_end must lie in [0, capacity]");
        }
        Ok(())
    }

    /// Copy with every energy quantity multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.capacity * k,
            self.rate_in * k,
            self.rate_out * k,
            self.efficiency,
            self.level_start * k,
            self.level_end * k,
        )
    }
}

/// Signed per-period flows; positive means the store buys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVector(pub Vec<f64>);

impl FlowVector {
    pub fn zeros(t: usize) -> Self {
        Self(vec![0.0; t])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Store levels `S_0..S_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub levels: Vec<f64>,
}

impl Schedule {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("schedule needs S_0".into()));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite level".into()));
        }
        Ok(Self { levels })
    }

    /// Constant schedule at `level` over `t` periods.
    pub fn idle(level: f64, t: usize) -> Self {
        Self {
            levels: vec![level; t + 1],
        }
    }

    pub fn from_flows(start: f64, flows: &FlowVector) -> Self {
        let mut levels = Vec::with_capacity(flows.len() + 1);
        let mut s = start;
        levels.push(s);
        for &x in &flows.0 {
            s += x;
            levels.push(s);
        }
        Self { levels }
    }

    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn flows(&self) -> FlowVector {
        flows(self)
    }
}

pub fn flows(s: &Schedule) -> FlowVector {
    FlowVector(s.levels.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Market-side quantity of a flow: purchases count in full, sales are
/// scaled by the round-trip efficiency.
#[inline]
pub fn eff_map(efficiency: f64, x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        efficiency * x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibilityViolation {
    StartLevel { expected: f64, actual: f64 },
    EndLevel { expected: f64, actual: f64 },
    Level { t: usize, level: f64 },
    Rate { t: usize, flow: f64 },
    Horizon { levels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub ok: bool,
    pub violations: Vec<FeasibilityViolation>,
}

pub fn feasible(spec: &StoreSpec, s: &Schedule, tol: f64) -> Feasibility {
    use FeasibilityViolation as V;
    let mut violations = Vec::new();
    let lv = &s.levels;
    if lv.len() < 2 {
        violations.push(V::Horizon { levels: lv.len() });
        return Feasibility {
            ok: false,
            violations,
        };
    }
    let t_len = lv.len() - 1;
    if (lv[0] - spec.level_start).abs() > tol {
        violations.push(V::StartLevel {
            expected: spec.level_start,
            actual: lv[0],
        });
    }
    if (lv[t_len] - spec.level_end).abs() > tol {
        violations.push(V::EndLevel {
            expected: spec.level_end,
            actual: lv[t_len],
        });
    }
    for (t, &level) in lv.iter().enumerate().take(t_len).skip(1) {
        if level < -tol || level > spec.capacity + tol {
            violations.push(V::Level { t, level });
        }
    }
    for (i, w) in lv.windows(2).enumerate() {
        let x = w[1] - w[0];
        if x > spec.rate_in + tol || x < -spec.rate_out - tol {
            violations.push(V::Rate { t: i + 1, flow: x });
        }
    }
    Feasibility {
        ok: violations.is_empty(),
        violations,
    }
}

/// Total cost `sum_t h(x_t) p_t(h(x_t) + others_t)`; profit is its negation.
pub fn store_cost(
    flows: &FlowVector,
    others: &FlowVector,
    prices: &[PriceFunction],
    efficiency: f64,
) -> Result<f64> {
    if flows.len() != prices.len() || others.len() != prices.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} flows, {} others, {} prices",
            flows.len(),
            others.len(),
            prices.len()
        )));
    }
    let mut total = 0.0;
    for ((&x, &k), pf) in flows.0.iter().zip(&others.0).zip(prices) {
        let h = eff_map(efficiency, x);
        if h != 0.0 {
            total += h * price_at(pf, h + k)?;
        } else {
            price_at(pf, k)?;
        }
    }
    Ok(total)
}
