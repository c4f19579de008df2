//! Per-period convex cost functions of a store's flow.
//!
//! The scheduler only needs three things from a period cost: its value,
//! its one-sided derivatives, and the set of minimisers of `C(x) - mu x`
//! over a box. [`PiecewiseQuadratic`] answers all three in closed form and
//! covers every cost built from linear or tabulated prices; arbitrary
//! convex functions go through [`FnCost`] with numeric derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::PriceFunction;
use crate::store::eff_map;

/// Relative tolerance under which a marginal cost counts as flat.
const FLAT_TOL: f64 = 1e-12;

pub trait PeriodCost: fmt::Debug + Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// `(left, right)` derivative at `x`.
    fn slopes(&self, x: f64) -> (f64, f64);

    /// Smallest and largest minimiser of `value(x) - mu x` on `[lo, hi]`.
    fn response(&self, mu: f64, lo: f64, hi: f64) -> (f64, f64) {
        numeric_response(self, mu, lo, hi)
    }
}

fn numeric_response<C: PeriodCost + ?Sized>(c: &C, mu: f64, lo: f64, hi: f64) -> (f64, f64) {
    let tau = FLAT_TOL * (1.0 + mu.abs());
    let bisect = |mut a: f64, mut b: f64, left_ok: &dyn Fn(f64) -> bool| {
        // invariant: left_ok(a), !left_ok(b)
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if left_ok(m) {
                a = m;
            } else {
                b = m;
            }
        }
        (a, b)
    };
    // smallest x whose right derivative reaches mu
    let x_lo = if c.slopes(lo).1 >= mu - tau {
        lo
    } else if c.slopes(hi).1 < mu - tau {
        hi
    } else {
        bisect(lo, hi, &|x| c.slopes(x).1 < mu - tau).1
    };
    // largest x whose left derivative stays below mu
    let x_hi = if c.slopes(hi).0 <= mu + tau {
        hi
    } else if c.slopes(lo).0 > mu + tau {
        lo
    } else {
        bisect(lo, hi, &|x| c.slopes(x).0 <= mu + tau).0
    };
    if x_lo <= x_hi {
        (x_lo, x_hi)
    } else {
        (x_hi, x_lo)
    }
}

/// Continuous convex piecewise-quadratic function; piece `i` is
/// `a x^2 + b x + c` on `[breaks[i], breaks[i + 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadratic {
    breaks: Vec<f64>,
    coef: Vec<[f64; 3]>,
}

impl PiecewiseQuadratic {
    pub fn new(breaks: Vec<f64>, coef: Vec<[f64; 3]>) -> Result<Self> {
        if breaks.len() != coef.len() + 1 || coef.is_empty() {
            return Err(Error::InvalidArgument(
                "need one more breakpoint than pieces".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("breakpoints must be sorted".into()));
        }
        let pq = Self { breaks, coef };
        pq.check_convex()?;
        Ok(pq)
    }

    /// `q x^2 / 2` on `[lo, hi]`.
    pub fn half_square(q: f64, lo: f64, hi: f64) -> Self {
        Self {
            breaks: vec![lo, hi],
            coef: vec![[0.5 * q, 0.0, 0.0]],
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breaks[0], self.breaks[self.breaks.len() - 1])
    }

    fn check_convex(&self) -> Result<()> {
        for (i, c) in self.coef.iter().enumerate() {
            if c[0] < -1e-12 * (1.0 + c[1].abs()) {
                return Err(Error::NotConvex(format!(
                    "piece {i} has negative curvature {}",
                    c[0]
                )));
            }
        }
        for i in 1..self.coef.len() {
            let x = self.breaks[i];
            let l = 2.0 * self.coef[i - 1][0] * x + self.coef[i - 1][1];
            let r = 2.0 * self.coef[i][0] * x + self.coef[i][1];
            if r < l - 1e-9 * (1.0 + l.abs()) {
                return Err(Error::NotConvex(format!(
                    "derivative drops from {l} to {r} at {x}"
                )));
            }
        }
        Ok(())
    }

    fn piece(&self, x: f64) -> usize {
        let m = self.coef.len();
        // first piece whose right end reaches x
        self.breaks[1..m].partition_point(|&b| b < x)
    }

    #[inline]
    fn d(c: &[f64; 3], x: f64) -> f64 {
        2.0 * c[0] * x + c[1]
    }
}

impl PeriodCost for PiecewiseQuadratic {
    fn value(&self, x: f64) -> f64 {
        let c = &self.coef[self.piece(x)];
        (c[0] * x + c[1]) * x + c[2]
    }

    fn slopes(&self, x: f64) -> (f64, f64) {
        let i = self.piece(x);
        let l = Self::d(&self.coef[i], x);
        let m = self.coef.len();
        // at an interior breakpoint the right derivative comes from the next piece
        let r = if i + 1 < m && x >= self.breaks[i + 1] {
            Self::d(&self.coef[i + 1], x)
        } else {
            l
        };
        (l, r)
    }

    fn response(&self, mu: f64, lo: f64, hi: f64) -> (f64, f64) {
        let m = self.coef.len();
        let tau = FLAT_TOL * (1.0 + mu.abs());
        let span = |i: usize| {
            (
                self.breaks[i].max(lo),
                if i + 1 == m {
                    hi
                } else {
                    self.breaks[i + 1].min(hi)
                },
            )
        };
        let first = if lo <= self.breaks[0] {
            0
        } else {
            self.piece(lo)
        };
        let last = if hi >= self.breaks[m] {
            m - 1
        } else {
            self.piece(hi)
        };
        let first_span = |i: usize| if i == first { (lo, span(i).1) } else { span(i) };

        let mut x_lo = hi;
        for i in first..=last {
            let (u, v) = first_span(i);
            if u > v {
                continue;
            }
            let c = &self.coef[i];
            if Self::d(c, u) >= mu - tau {
                x_lo = u;
                break;
            }
            if Self::d(c, v) >= mu - tau {
                x_lo = if c[0] > 0.0 {
                    ((mu - c[1]) / (2.0 * c[0])).clamp(u, v)
                } else {
                    v
                };
                break;
            }
        }
        let mut x_hi = lo;
        for i in (first..=last).rev() {
            let (u, v) = first_span(i);
            if u > v {
                continue;
            }
            let c = &self.coef[i];
            if Self::d(c, v) <= mu + tau {
                x_hi = v;
                break;
            }
            if Self::d(c, u) <= mu + tau {
                x_hi = if c[0] > 0.0 {
                    ((mu - c[1]) / (2.0 * c[0])).clamp(u, v)
                } else {
                    u
                };
                break;
            }
        }
        if x_lo <= x_hi {
            (x_lo, x_hi)
        } else {
            // the two scans met inside one strictly convex piece
            let m = 0.5 * (x_lo + x_hi);
            (m, m)
        }
    }
}

/// Left and right derivatives at a point.
type Slopes = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// Convex cost given by a closure. Derivatives come from a supplied
/// closure or, failing that, one-sided second-order finite differences.
#[derive(Clone)]
pub struct FnCost {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Option<Arc<Slopes>>,
    step: f64,
}

impl FnCost {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            df: None,
            step: 1e-6,
        }
    }

    /// `slopes` returns the `(left, right)` derivative.
    pub fn with_slopes(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slopes: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Some(Arc::new(slopes)),
            step: 1e-6,
        }
    }
}

impl fmt::Debug for FnCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnCost")
            .field("analytic", &self.df.is_some())
            .finish()
    }
}

impl PeriodCost for FnCost {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn slopes(&self, x: f64) -> (f64, f64) {
        if let Some(df) = &self.df {
            return df(x);
        }
        let h = self.step * (1.0 + x.abs());
        let f = &self.f;
        let f0 = f(x);
        let r = (-3.0 * f0 + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h);
        let l = (3.0 * f0 - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h);
        (l, r)
    }
}

/// A period cost usable by the scheduler.
#[derive(Debug, Clone)]
pub enum Cost {
    Pq(PiecewiseQuadratic),
    Dyn(Arc<dyn PeriodCost>),
}

impl PeriodCost for Cost {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        match self {
            Cost::Pq(c) => c.value(x),
            Cost::Dyn(c) => c.value(x),
        }
    }

    #[inline]
    fn slopes(&self, x: f64) -> (f64, f64) {
        match self {
            Cost::Pq(c) => c.slopes(x),
            Cost::Dyn(c) => c.slopes(x),
        }
    }

    #[inline]
    fn response(&self, mu: f64, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            Cost::Pq(c) => c.response(mu, lo, hi),
            Cost::Dyn(c) => c.response(mu, lo, hi),
        }
    }
}

impl From<PiecewiseQuadratic> for Cost {
    fn from(c: PiecewiseQuadratic) -> Self {
        Cost::Pq(c)
    }
}

/// Builds `(h(x) + gamma) p(h(x) + k) - d` on `[lo, hi]` as a piecewise
/// quadratic in `x`.
pub fn price_cost(
    pf: &PriceFunction,
    efficiency: f64,
    k: f64,
    gamma: f64,
    d: f64,
    lo: f64,
    hi: f64,
) -> Result<PiecewiseQuadratic> {
    let (ylo, yhi) = (eff_map(efficiency, lo) + k, eff_map(efficiency, hi) + k);
    if !pf.contains(ylo) {
        return Err(Error::Domain {
            x: ylo,
            lo: pf.valid_range.0,
            hi: pf.valid_range.1,
        });
    }
    if !pf.contains(yhi) {
        return Err(Error::Domain {
            x: yhi,
            lo: pf.valid_range.0,
            hi: pf.valid_range.1,
        });
    }
    let pieces = pf.pieces();
    let mut breaks = vec![lo, hi];
    if lo < 0.0 && hi > 0.0 {
        breaks.push(0.0);
    }
    for &(y0, _, _, _) in pieces.iter().skip(1) {
        let x = if y0 - k >= 0.0 {
            y0 - k
        } else {
            (y0 - k) / efficiency
        };
        if x > lo && x < hi {
            breaks.push(x);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.len() == 1 {
        breaks.push(breaks[0]);
    }

    let mut coef = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let s = if mid > 0.0 || (mid == 0.0 && w[0] >= 0.0) {
            1.0
        } else {
            efficiency
        };
        let y = s * mid + k;
        let j = pieces
            .iter()
            .position(|p| y <= p.1)
            .unwrap_or(pieces.len() - 1);
        let (_, _, alpha, beta) = pieces[j];
        let base = alpha + beta * k;
        coef.push([beta * s * s, s * (base + gamma * beta), gamma * base - d]);
    }
    PiecewiseQuadratic::new(breaks, coef)
}

/// Store's own cost `h(x) p(h(x) + k)` given companions' aggregate `k`.
pub fn own_cost(pf: &PriceFunction, efficiency: f64, k: f64, lo: f64, hi: f64) -> Result<Cost> {
    price_cost(pf, efficiency, k, 0.0, 0.0, lo, hi).map(Cost::Pq)
}

/// Joint cost increment `(h + k) p(h + k) - k p(k)` borne by all stores.
pub fn joint_cost(pf: &PriceFunction, efficiency: f64, k: f64, lo: f64, hi: f64) -> Result<Cost> {
    let d = k * pf.eval(k);
    price_cost(pf, efficiency, k, k, d, lo, hi).map(Cost::Pq)
}
