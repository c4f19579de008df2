//! Consumer-surplus accounting and cost models for stores owned by
//! consumers, by the generator, or by a social planner.
//!
//! Each adapter returns one convex cost function of the store's flow per
//! period, ready for [`crate::dispatch::optimize_with_costs`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cost::{Cost, FnCost, PeriodCost};
use crate::error::{Error, Result};
use crate::market::{interpolate, piece_slopes, PriceFunction};
use crate::store::eff_map;

/// Consumer demand as a function of price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DemandModel {
    Inelastic(f64),
    /// `max(a - b p, 0)`.
    Linear {
        a: f64,
        b: f64,
    },
    /// `(price, quantity)` with increasing prices and nonincreasing
    /// quantities; flat beyond the table.
    Tabulated(Vec<(f64, f64)>),
}

impl DemandModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DemandModel::Inelastic(d) if *d >= 0.0 => Ok(()),
            DemandModel::Linear { a, b } if *a >= 0.0 && *b >= 0.0 => Ok(()),
            DemandModel::Tabulated(pts) if pts.len() >= 2 => {
                for w in pts.windows(2) {
                    if !(w[1].0 > w[0].0) || w[1].1 > w[0].1 {
                        return Err(Error::InvalidArgument(
                            "demand table must have increasing prices and nonincreasing quantities"
                                .into(),
                        ));
                    }
                }
                if pts.iter().any(|p| p.1 < 0.0) {
                    return Err(Error::InvalidArgument("negative demand".into()));
                }
                Ok(())
            }
            _ => Err(Error::InvalidArgument(format!(
                "invalid demand model {self:?}"
            ))),
        }
    }

    pub fn quantity(&self, p: f64) -> f64 {
        match self {
            DemandModel::Inelastic(d) => *d,
            DemandModel::Linear { a, b } => (a - b * p).max(0.0),
            DemandModel::Tabulated(pts) => {
                if p <= pts[0].0 {
                    pts[0].1
                } else if p >= pts[pts.len() - 1].0 {
                    pts[pts.len() - 1].1
                } else {
                    interpolate(pts, p)
                }
            }
        }
    }

    /// Derivative in price (right derivative at kinks).
    fn slope(&self, p: f64) -> f64 {
        match self {
            DemandModel::Inelastic(_) => 0.0,
            DemandModel::Linear { a, b } => {
                if a - b * p > 0.0 {
                    -b
                } else {
                    0.0
                }
            }
            DemandModel::Tabulated(pts) => {
                if p < pts[0].0 || p >= pts[pts.len() - 1].0 {
                    0.0
                } else {
                    piece_slopes(pts, p).1
                }
            }
        }
    }

    /// `int_{p0}^{p1} d(p) dp`, exact for every form.
    pub fn integral(&self, p0: f64, p1: f64) -> f64 {
        if p1 < p0 {
            return -self.integral(p1, p0);
        }
        match self {
            DemandModel::Inelastic(d) => d * (p1 - p0),
            DemandModel::Linear { a, b } => {
                if *b == 0.0 {
                    return a * (p1 - p0);
                }
                let choke = a / b;
                let hi = p1.min(choke);
                if hi <= p0 {
                    return 0.0;
                }
                let anti = |p: f64| a * p - 0.5 * b * p * p;
                anti(hi) - anti(p0)
            }
            DemandModel::Tabulated(pts) => {
                let mut knots = vec![p0, p1];
                knots.extend(pts.iter().map(|q| q.0).filter(|&q| q > p0 && q < p1));
                knots.sort_by(f64::total_cmp);
                knots
                    .windows(2)
                    .map(|w| 0.5 * (self.quantity(w[0]) + self.quantity(w[1])) * (w[1] - w[0]))
                    .sum()
            }
        }
    }
}

/// Absolute consumer surplus at price `p`. Diverges for inelastic demand,
/// so only the linear form (with a finite choke price) is supported.
pub fn absolute_surplus(demand: &DemandModel, p: f64) -> Result<f64> {
    match demand {
        DemandModel::Linear { a, b } if *b > 0.0 => Ok(demand.integral(p, a / b)),
        _ => Err(Error::Unsupported(
            "absolute surplus diverges; use surplus deltas".into(),
        )),
    }
}

/// Change in consumer surplus from the storage, `sum_t int_{with}^{without} d_t`;
/// positive when consumers gain.
pub fn surplus_delta_exact(
    demand: &[DemandModel],
    prices_with: &[f64],
    prices_without: &[f64],
) -> Result<f64> {
    if demand.len() != prices_with.len() || prices_with.len() != prices_without.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    Ok(demand
        .iter()
        .zip(prices_with.iter().zip(prices_without))
        .map(|(d, (&w, &wo))| d.integral(w, wo))
        .sum())
}

/// First-order surplus change `-sum_t h_t p'_t d_t(pbar_t)`.
pub fn surplus_delta_approx(
    flows_marketside: &[f64],
    slopes: &[f64],
    base_demand: &[f64],
) -> Result<f64> {
    if flows_marketside.len() != slopes.len() || slopes.len() != base_demand.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    Ok(-flows_marketside
        .iter()
        .zip(slopes)
        .zip(base_demand)
        .map(|((h, s), d)| h * s * d)
        .sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MarginalCost {
    /// `c0 + c1 q`.
    Linear { c0: f64, c1: f64 },
    /// `(quantity, marginal cost)` starting at zero output, nondecreasing.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub marginal_cost: MarginalCost,
    pub capacity: f64,
}

impl GeneratorModel {
    pub fn linear(c0: f64, c1: f64, capacity: f64) -> Result<Self> {
        let g = Self {
            marginal_cost: MarginalCost::Linear { c0, c1 },
            capacity,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > 0.0) {
            return Err(Error::InvalidArgument(
                "generator capacity must be positive".into(),
            ));
        }
        match &self.marginal_cost {
            MarginalCost::Linear { c1, .. } if *c1 >= 0.0 => Ok(()),
            MarginalCost::Tabulated(pts)
                if pts.len() >= 2
                    && pts[0].0 == 0.0
                    && pts.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1) =>
            {
                Ok(())
            }
            _ => Err(Error::InvalidArgument(
                "marginal cost must be nondecreasing (tables start at zero output)".into(),
            )),
        }
    }

    pub fn mc(&self, q: f64) -> f64 {
        match &self.marginal_cost {
            MarginalCost::Linear { c0, c1 } => c0 + c1 * q,
            MarginalCost::Tabulated(pts) => interpolate(pts, q),
        }
    }

    fn mc_slopes(&self, q: f64) -> (f64, f64) {
        match &self.marginal_cost {
            MarginalCost::Linear { c1, .. } => (*c1, *c1),
            MarginalCost::Tabulated(pts) => piece_slopes(pts, q),
        }
    }

    /// Production cost `int_0^q mc`.
    pub fn cost(&self, q: f64) -> f64 {
        match &self.marginal_cost {
            MarginalCost::Linear { c0, c1 } => c0 * q + 0.5 * c1 * q * q,
            MarginalCost::Tabulated(pts) => {
                let mut knots = vec![0.0, q];
                knots.extend(pts.iter().map(|p| p.0).filter(|&z| z > 0.0 && z < q));
                knots.sort_by(f64::total_cmp);
                knots
                    .windows(2)
                    .map(|w| 0.5 * (self.mc(w[0]) + self.mc(w[1])) * (w[1] - w[0]))
                    .sum()
            }
        }
    }

    /// Output `q` with `q = d(mc(q)) + h`: the generator supplies demand
    /// plus the store's purchase at a price equal to its marginal cost.
    fn output(&self, demand: &DemandModel, h: f64) -> Option<f64> {
        let f = |q: f64| q - demand.quantity(self.mc(q)) - h;
        let (mut a, mut b) = (0.0, self.capacity);
        if f(a) > 0.0 || f(b) < 0.0 {
            return None;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if f(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Some(if -f(a) <= f(b) { a } else { b })
    }
}

const CONVEXITY_SAMPLES: usize = 201;

/// Rejects costs that are not convex on `[lo, hi]` or nonzero at zero.
fn check_adapter(c: &FnCost, lo: f64, hi: f64, period: usize) -> Result<()> {
    let v0 = c.value(0.0);
    if v0.abs() > 1e-9 {
        return Err(Error::NotConvex(format!(
            "period {period}: cost at zero flow is {v0}"
        )));
    }
    let xs: Vec<f64> = (0..CONVEXITY_SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / (CONVEXITY_SAMPLES - 1) as f64)
        .chain([0.0])
        .filter(|x| (lo..=hi).contains(x))
        .collect();
    let mut xs = xs;
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let vals: Vec<f64> = xs.iter().map(|&x| c.value(x)).collect();
    for i in 1..xs.len().saturating_sub(1) {
        let s0 = (vals[i] - vals[i - 1]) / (xs[i] - xs[i - 1]);
        let s1 = (vals[i + 1] - vals[i]) / (xs[i + 1] - xs[i]);
        if s1 < s0 - 1e-7 * (1.0 + s0.abs()) {
            return Err(Error::NotConvex(format!(
                "period {period}: cost is not convex near x = {}",
                xs[i]
            )));
        }
    }
    Ok(())
}

/// Lifts a cost `g` of the market-side quantity to the store's flow.
fn lift(
    eps: f64,
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    dg: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static,
) -> FnCost {
    let g = Arc::new(g);
    let dg = Arc::new(dg);
    let g2 = g.clone();
    FnCost::with_slopes(
        move |x| g2(eff_map(eps, x)),
        move |x| {
            if x > 0.0 {
                dg(x)
            } else if x < 0.0 {
                let (l, r) = dg(eps * x);
                (eps * l, eps * r)
            } else {
                let (l, r) = dg(0.0);
                (eps * l, r)
            }
        },
    )
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::InvalidArgument(format!(
            "need one model per period ({a} vs {b})"
        )));
    }
    Ok(())
}

/// Consumers own the store: they pay for its trades and bear the surplus
/// loss from the price move, `h p(h) + int_{p(0)}^{p(h)} d`.
pub fn consumer_owned_costs(
    prices: &[PriceFunction],
    demand: &[DemandModel],
    eps: f64,
    range: (f64, f64),
) -> Result<Vec<Cost>> {
    check_lengths(prices.len(), demand.len())?;
    let mut out = Vec::with_capacity(prices.len());
    for (t, (pf, d)) in prices.iter().zip(demand).enumerate() {
        d.validate()?;
        for x in [range.0, range.1] {
            let y = eff_map(eps, x);
            if !pf.contains(y) {
                return Err(Error::Domain {
                    x: y,
                    lo: pf.valid_range.0,
                    hi: pf.valid_range.1,
                });
            }
        }
        let (pf1, d1) = (pf.clone(), d.clone());
        let (pf2, d2) = (pf.clone(), d.clone());
        let p0 = pf.eval(0.0);
        let c = lift(
            eps,
            move |h| h * pf1.eval(h) + d1.integral(p0, pf1.eval(h)),
            move |h| {
                let p = pf2.eval(h);
                let (l, r) = pf2.slopes_at(h);
                let q = h + d2.quantity(p);
                (p + q * l, p + q * r)
            },
        );
        check_adapter(&c, range.0, range.1, t + 1)?;
        out.push(Cost::Dyn(Arc::new(c)));
    }
    Ok(out)
}

fn operating_check(
    gen: &GeneratorModel,
    demand: &DemandModel,
    eps: f64,
    range: (f64, f64),
    t: usize,
) -> Result<()> {
    gen.validate()?;
    demand.validate()?;
    for h in [eff_map(eps, range.0), 0.0, eff_map(eps, range.1)] {
        if gen.output(demand, h).is_none() {
            return Err(Error::NoClearing(format!(
                "period {t}: generator cannot clear demand with storage quantity {h}"
            )));
        }
    }
    Ok(())
}

/// Generator owns the store: the cost is the change in production cost
/// less the change in revenue from consumers, with the generator supplying
/// at marginal cost.
pub fn generator_owned_costs(
    gens: &[GeneratorModel],
    demand: &[DemandModel],
    eps: f64,
    range: (f64, f64),
) -> Result<Vec<Cost>> {
    check_lengths(gens.len(), demand.len())?;
    let mut out = Vec::with_capacity(gens.len());
    for (t, (g, d)) in gens.iter().zip(demand).enumerate() {
        operating_check(g, d, eps, range, t + 1)?;
        let net = {
            let (g, d) = (g.clone(), d.clone());
            move |h: f64| {
                let q = g.output(&d, h).unwrap_or(f64::NAN);
                let p = g.mc(q);
                g.cost(q) - p * d.quantity(p)
            }
        };
        let base = net(0.0);
        let (g2, d2) = (g.clone(), d.clone());
        let c = lift(
            eps,
            move |h| net(h) - base,
            move |h| {
                // dG/dh = p - d(p) mc'(q) dq/dh, dq/dh = 1 / (1 - d'(p) mc'(q))
                let q = g2.output(&d2, h).unwrap_or(f64::NAN);
                let p = g2.mc(q);
                let dd = d2.slope(p);
                let side = |m: f64| p - d2.quantity(p) * m / (1.0 - dd * m);
                let (l, r) = g2.mc_slopes(q);
                (side(l), side(r))
            },
        );
        check_adapter(&c, range.0, range.1, t + 1)?;
        out.push(Cost::Dyn(Arc::new(c)));
    }
    Ok(out)
}

/// Society owns generator and store: the cost is the change in production
/// cost less the change in consumers' gross benefit. Its marginal cost is
/// the generator's marginal cost.
pub fn social_costs(
    gens: &[GeneratorModel],
    demand: &[DemandModel],
    eps: f64,
    range: (f64, f64),
) -> Result<Vec<Cost>> {
    check_lengths(gens.len(), demand.len())?;
    let mut out = Vec::with_capacity(gens.len());
    for (t, (g, d)) in gens.iter().zip(demand).enumerate() {
        operating_check(g, d, eps, range, t + 1)?;
        let (g1, d1) = (g.clone(), d.clone());
        let q0 = g.output(d, 0.0).unwrap_or(f64::NAN);
        let p0 = g.mc(q0);
        let base = g.cost(q0) - p0 * d.quantity(p0);
        let (g2, d2) = (g.clone(), d.clone());
        let c = lift(
            eps,
            move |h| {
                let q = g1.output(&d1, h).unwrap_or(f64::NAN);
                let p = g1.mc(q);
                // production cost change minus gross-benefit change
                g1.cost(q) - p * d1.quantity(p) - base + d1.integral(p0, p)
            },
            move |h| {
                let q = g2.output(&d2, h).unwrap_or(f64::NAN);
                let p = g2.mc(q);
                (p, p)
            },
        );
        check_adapter(&c, range.0, range.1, t + 1)?;
        out.push(Cost::Dyn(Arc::new(c)));
    }
    Ok(out)
}
