//! Per-period price functions, their standing assumptions, and two-period
//! supply-function clearing.
//!
//! A [`PriceFunction`] maps the total market-side quantity bought by all
//! stores in one period to the clearing price. Two forms are supported:
//! linear (`pbar + slope * x`) and tabulated (piecewise-linear interpolation
//! between breakpoints).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{eff_map, Schedule, StoreSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriceForm {
    Linear {
        pbar: f64,
        slope: f64,
    },
    /// Breakpoints `(quantity, price)` with strictly increasing quantities.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceFunction {
    pub form: PriceForm,
    pub valid_range: (f64, f64),
}

impl PriceFunction {
    pub fn linear(pbar: f64, slope: f64, valid_range: (f64, f64)) -> Result<Self> {
        if !(pbar.is_finite() && slope.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite linear coefficients".into(),
            ));
        }
        check_range(valid_range)?;
        Ok(Self {
            form: PriceForm::Linear { pbar, slope },
            valid_range,
        })
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(
                "tabulated price function needs at least two breakpoints".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(
                    "breakpoint quantities must be strictly increasing".into(),
                ));
            }
        }
        if points.iter().any(|(q, p)| !q.is_finite() || !p.is_finite()) {
            return Err(Error::InvalidArgument("non-finite breakpoint".into()));
        }
        let valid_range = (points[0].0, points[points.len() - 1].0);
        Ok(Self {
            form: PriceForm::Tabulated(points),
            valid_range,
        })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.form, PriceForm::Linear { .. })
    }

    /// `(pbar, slope)` for the linear form.
    pub fn linear_coefficients(&self) -> Option<(f64, f64)> {
        match self.form {
            PriceForm::Linear { pbar, slope } => Some((pbar, slope)),
            PriceForm::Tabulated(_) => None,
        }
    }

    /// Price at zero storage activity.
    pub fn base_price(&self) -> f64 {
        match &self.form {
            PriceForm::Linear { pbar, .. } => *pbar,
            PriceForm::Tabulated(_) => self.eval(0.0),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.valid_range;
        let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        x >= lo - tol && x <= hi + tol
    }

    /// Unchecked evaluation; tabulated forms extrapolate their end segments.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        match &self.form {
            PriceForm::Linear { pbar, slope } => pbar + slope * x,
            PriceForm::Tabulated(pts) => interpolate(pts, x),
        }
    }

    /// `(left, right)` slope of the price at quantity `x`.
    pub fn slopes_at(&self, x: f64) -> (f64, f64) {
        match &self.form {
            PriceForm::Linear { slope, .. } => (*slope, *slope),
            PriceForm::Tabulated(pts) => piece_slopes(pts, x),
        }
    }

    /// Linear pieces `(y0, y1, alpha, beta)` with `p(y) = alpha + beta * y`
    /// on `[y0, y1]`, covering the valid range.
    pub(crate) fn pieces(&self) -> Vec<(f64, f64, f64, f64)> {
        match &self.form {
            PriceForm::Linear { pbar, slope } => {
                vec![(self.valid_range.0, self.valid_range.1, *pbar, *slope)]
            }
            PriceForm::Tabulated(pts) => pts
                .windows(2)
                .map(|w| {
                    let beta = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    (w[0].0, w[1].0, w[0].1 - beta * w[0].0, beta)
                })
                .collect(),
        }
    }
}

fn check_range(r: (f64, f64)) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite() && r.0 < r.1) {
        return Err(Error::InvalidArgument(format!(
            "valid range [{}, {}] must be finite and nonempty",
            r.0, r.1
        )));
    }
    Ok(())
}

pub(crate) fn interpolate(pts: &[(f64, f64)], x: f64) -> f64 {
    let n = pts.len();
    let i = match pts.iter().position(|&(q, _)| q >= x) {
        Some(0) => 1,
        Some(i) => i,
        None => n - 1,
    };
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Left and right slopes of a piecewise-linear table at `x`, with the end
/// segments extended.
pub(crate) fn piece_slopes(pts: &[(f64, f64)], x: f64) -> (f64, f64) {
    let slope = |i: usize| (pts[i + 1].1 - pts[i].1) / (pts[i + 1].0 - pts[i].0);
    let m = pts.len() - 1;
    // index of the segment whose interior or right end contains x
    let i = pts[1..m].partition_point(|&(q, _)| q < x);
    let l = slope(i);
    let r = if i + 1 < m && x >= pts[i + 1].0 {
        slope(i + 1)
    } else {
        l
    };
    (l, r)
}

/// Market price when the stores jointly buy `x` (market-side) units.
pub fn price_at(pf: &PriceFunction, x: f64) -> Result<f64> {
    if !pf.contains(x) {
        return Err(Error::Domain {
            x,
            lo: pf.valid_range.0,
            hi: pf.valid_range.1,
        });
    }
    Ok(pf.eval(x))
}

/// One failed standing assumption, with its witnessing grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AssumptionViolation {
    Positivity {
        x: f64,
        price: f64,
    },
    Monotonicity {
        x0: f64,
        x1: f64,
        p0: f64,
        p1: f64,
    },
    Convexity {
        k: f64,
        x: f64,
        second_difference: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<AssumptionViolation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const CONVEXITY_TOL: f64 = 1e-9;

fn sample_grid(pf: &PriceFunction, grid_n: usize) -> Vec<f64> {
    match &pf.form {
        PriceForm::Linear { .. } => {
            let (lo, hi) = pf.valid_range;
            (0..grid_n)
                .map(|i| lo + (hi - lo) * i as f64 / (grid_n - 1) as f64)
                .collect()
        }
        // breakpoints plus midpoints
        PriceForm::Tabulated(pts) => {
            let mut g = Vec::with_capacity(2 * pts.len());
            for w in pts.windows(2) {
                g.push(w[0].0);
                g.push(0.5 * (w[0].0 + w[1].0));
            }
            g.push(pts[pts.len() - 1].0);
            g
        }
    }
}

/// Checks positivity, monotonicity and convexity of `x -> x p(x + k)` for
/// `k` sampled over `k_range`. Violations are reported, never raised.
pub fn validate_price_function(
    pf: &PriceFunction,
    k_range: (f64, f64),
    grid_n: usize,
) -> Result<ValidationReport> {
    if grid_n < 3 {
        return Err(Error::InvalidArgument("grid_n must be at least 3".into()));
    }
    let mut report = ValidationReport::default();
    let grid = sample_grid(pf, grid_n);

    if let Some(&x) = grid.iter().find(|&&x| pf.eval(x) <= 0.0) {
        report.violations.push(AssumptionViolation::Positivity {
            x,
            price: pf.eval(x),
        });
    }
    for w in grid.windows(2) {
        let (p0, p1) = (pf.eval(w[0]), pf.eval(w[1]));
        if p1 < p0 {
            report.violations.push(AssumptionViolation::Monotonicity {
                x0: w[0],
                x1: w[1],
                p0,
                p1,
            });
            break;
        }
    }

    let (klo, khi) = k_range;
    let nk = if khi > klo { grid_n } else { 1 };
    let (ylo, yhi) = pf.valid_range;
    'outer: for ik in 0..nk {
        let k = if nk == 1 {
            klo
        } else {
            klo + (khi - klo) * ik as f64 / (nk - 1) as f64
        };
        // x ranges over points with x + k inside the valid range
        let xs: Vec<f64> = grid
            .iter()
            .map(|&y| y - k)
            .filter(|&x| x + k >= ylo && x + k <= yhi)
            .collect();
        if xs.len() < 3 {
            continue;
        }
        let phi: Vec<f64> = xs.iter().map(|&x| x * pf.eval(x + k)).collect();
        for i in 1..xs.len() - 1 {
            let s0 = (phi[i] - phi[i - 1]) / (xs[i] - xs[i - 1]);
            let s1 = (phi[i + 1] - phi[i]) / (xs[i + 1] - xs[i]);
            let d2 = (s1 - s0) * 0.5 * (xs[i + 1] - xs[i - 1]);
            if d2 < -CONVEXITY_TOL * (1.0 + phi[i].abs()) {
                report.violations.push(AssumptionViolation::Convexity {
                    k,
                    x: xs[i],
                    second_difference: d2,
                });
                break 'outer;
            }
        }
    }
    Ok(report)
}

/// Price slope implied by point elasticities of supply and demand at `pbar`:
/// `pbar / (e_s * s - e_d * d)`.
pub fn slope_from_elasticity(pbar: f64, e_s: f64, s: f64, e_d: f64, d: f64) -> Result<f64> {
    let denom = e_s * s - e_d * d;
    if !(denom > 0.0) {
        return Err(Error::DegenerateMarket(format!(
            "e_s*s - e_d*d = {denom} must be positive"
        )));
    }
    Ok(pbar / denom)
}

/// Monotone scalar curve of price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Curve {
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// `(price, value)` breakpoints, strictly increasing prices.
    Tabulated(Vec<(f64, f64)>),
}

impl Curve {
    fn eval(&self, p: f64) -> f64 {
        match self {
            Curve::Linear { intercept, slope } => intercept + slope * p,
            Curve::Tabulated(pts) => interpolate(pts, p),
        }
    }

    fn inverse(&self, q: f64) -> f64 {
        match self {
            Curve::Linear { intercept, slope } => (q - intercept) / slope,
            Curve::Tabulated(pts) => {
                let swapped: Vec<(f64, f64)> = pts.iter().map(|&(p, v)| (v, p)).collect();
                interpolate(&swapped, q)
            }
        }
    }
}

/// External supply minus external demand, as a strictly increasing
/// function of price. Its inverse is the period's price function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSupply {
    pub curve: Curve,
    pub price_range: (f64, f64),
}

impl ResidualSupply {
    pub fn linear(intercept: f64, slope: f64, price_range: (f64, f64)) -> Result<Self> {
        if !(slope > 0.0) {
            return Err(Error::InvalidArgument(
                "residual supply must be strictly increasing".into(),
            ));
        }
        check_range(price_range)?;
        Ok(Self {
            curve: Curve::Linear { intercept, slope },
            price_range,
        })
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two breakpoints".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::InvalidArgument(
                    "tabulated residual supply must be strictly increasing".into(),
                ));
            }
        }
        let price_range = (points[0].0, points[points.len() - 1].0);
        Ok(Self {
            curve: Curve::Tabulated(points),
            price_range,
        })
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.curve.eval(p)
    }

    /// Price at which the residual supply equals `q`.
    pub fn inverse(&self, q: f64) -> f64 {
        self.curve.inverse(q)
    }
}

/// Aggregate nondecreasing supply function bid as a function of the price
/// differential `p2 - p1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SupplyBid {
    Zero,
    Linear {
        intercept: f64,
        slope: f64,
        /// Clamp negative bids to zero.
        floor_at_zero: bool,
    },
    /// `(price differential, quantity)`, held flat outside the table.
    Tabulated(Vec<(f64, f64)>),
}

impl SupplyBid {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            SupplyBid::Zero => 0.0,
            SupplyBid::Linear {
                intercept,
                slope,
                floor_at_zero,
            } => {
                let v = intercept + slope * p;
                if *floor_at_zero {
                    v.max(0.0)
                } else {
                    v
                }
            }
            SupplyBid::Tabulated(pts) => {
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
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPeriodClearing {
    pub p1: f64,
    pub p2: f64,
    pub pdiff: f64,
    pub q: f64,
}

const CLEARING_TOL: f64 = 1e-10;
const CLEARING_MAX_ITER: usize = 200;

/// Clears the two-period supply-function auction: finds `(p1, p2)` with
/// `R1(p1) = s(p2 - p1)` and `R2(p2) = -R1(p1)`.
///
/// For a trial differential `p`, `p1(p)` solves `R1(p1) + R2(p1 + p) = 0`;
/// `R1(p1(p))` decreases in `p` while the bid increases, so the defect is
/// bisected on `p`.
pub fn clear_two_period(
    r1: &ResidualSupply,
    r2: &ResidualSupply,
    bid: &SupplyBid,
) -> Result<TwoPeriodClearing> {
    let lo = r1.price_range.0.min(r2.price_range.0);
    let hi = r1.price_range.1.max(r2.price_range.1);
    let mut b = hi - lo;
    if !(b > 0.0) {
        b = 1.0;
    }

    let p1_of = |p: f64| -> Result<f64> {
        let f = |p1: f64| r1.eval(p1) + r2.eval(p1 + p);
        let (mut a, mut c) = (lo - b - p.abs(), hi + b + p.abs());
        let mut widen = 0;
        while !(f(a) <= 0.0 && f(c) >= 0.0) {
            widen += 1;
            if widen > 10 {
                return Err(Error::NoClearing(format!(
                    "no price p1 balances the two periods at differential {p}"
                )));
            }
            let w = c - a;
            a -= w;
            c += w;
        }
        for _ in 0..CLEARING_MAX_ITER {
            let m = 0.5 * (a + c);
            let v = f(m);
            if v.abs() <= CLEARING_TOL || c - a <= f64::EPSILON * (1.0 + m.abs()) {
                return Ok(m);
            }
            if v < 0.0 {
                a = m;
            } else {
                c = m;
            }
        }
        Ok(0.5 * (a + c))
    };
    let defect = |p: f64| -> Result<f64> { Ok(bid.eval(p) - r1.eval(p1_of(p)?)) };

    let (mut a, mut c) = (-b, b);
    let mut widen = 0;
    loop {
        let (da, dc) = (defect(a)?, defect(c)?);
        if da <= 0.0 && dc >= 0.0 {
            break;
        }
        widen += 1;
        if widen > 10 {
            return Err(Error::NoClearing(format!(
                "defect has no sign change on [{a}, {c}]"
            )));
        }
        a *= 2.0;
        c *= 2.0;
    }
    let mut p = 0.5 * (a + c);
    for _ in 0..CLEARING_MAX_ITER {
        p = 0.5 * (a + c);
        let d = defect(p)?;
        if d.abs() <= CLEARING_TOL {
            break;
        }
        if d < 0.0 {
            a = p;
        } else {
            c = p;
        }
    }
    // Recover prices from the cleared quantity through the inverses so that
    // R1(p1) = q and R2(p2) = -q hold as tightly as the inverses allow.
    let q = bid.eval(p);
    let p1 = r1.inverse(q);
    let p2 = r2.inverse(-q);
    Ok(TwoPeriodClearing {
        p1,
        p2,
        pdiff: p2 - p1,
        q,
    })
}

/// Clearing price `p_t(sum_i h_i(x_it))` for each period.
pub fn clearing_prices(
    prices: &[PriceFunction],
    specs: &[StoreSpec],
    schedules: &[Schedule],
) -> Result<Vec<f64>> {
    if specs.len() != schedules.len() {
        return Err(Error::InvalidArgument(
            "one schedule per store spec required".into(),
        ));
    }
    let t_len = prices.len();
    let mut agg = vec![0.0; t_len];
    for (spec, s) in specs.iter().zip(schedules) {
        if s.horizon() != t_len {
            return Err(Error::InvalidArgument(format!(
                "schedule horizon {} does not match {} price periods",
                s.horizon(),
                t_len
            )));
        }
        for (a, x) in agg.iter_mut().zip(s.flows().0) {
            *a += eff_map(spec.efficiency, x);
        }
    }
    prices
        .iter()
        .zip(&agg)
        .map(|(pf, &q)| price_at(pf, q))
        .collect()
}
