//! Exact scheduler for separable convex costs under rate and level bounds.
//!
//! The optimal multiplier path is piecewise constant: it only moves at
//! periods where the level touches a bound. The scan grows a segment from
//! a known level, keeping the interval `[A, B]` of constant multipliers
//! that respect every level bound seen so far. When the interval empties,
//! the segment closes at the bound that last tightened the violated side,
//! and the scan restarts from there.

use crate::cost::{PeriodCost, PiecewiseQuadratic};
use crate::error::{Error, Result};

/// Per-period bounds of a scheduling problem. Index `t` refers to the
/// flow in period `t + 1` and the level at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub rate_lo: Vec<f64>,
    pub rate_hi: Vec<f64>,
    pub level_lo: Vec<f64>,
    pub level_hi: Vec<f64>,
    pub start: f64,
    /// Value of stored energy at the horizon when the final level is free.
    pub salvage: f64,
}

impl Bounds {
    pub fn len(&self) -> usize {
        self.rate_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate_lo.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty horizon".into()));
        }
        if self.rate_hi.len() != n || self.level_lo.len() != n || self.level_hi.len() != n {
            return Err(Error::InvalidArgument(
                "bound vectors differ in length".into(),
            ));
        }
        for t in 0..n {
            if !(self.rate_lo[t] <= self.rate_hi[t]) || !(self.level_lo[t] <= self.level_hi[t]) {
                return Err(Error::InvalidArgument(format!(
                    "empty bound at period {}",
                    t + 1
                )));
            }
        }
        Ok(())
    }

    /// Forward pass over reachable level intervals.
    pub fn reachable(&self) -> Result<()> {
        let (mut lo, mut hi) = (self.start, self.start);
        for t in 0..self.len() {
            let tol = 1e-9 * (1.0 + self.level_hi[t].abs());
            lo = (lo + self.rate_lo[t]).max(self.level_lo[t]);
            hi = (hi + self.rate_hi[t]).min(self.level_hi[t]);
            if lo > hi + tol {
                return Err(Error::Infeasible(format!(
                    "no level in [{}, {}] reachable at period {}",
                    self.level_lo[t],
                    self.level_hi[t],
                    t + 1
                )));
            }
            hi = hi.max(lo);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub flows: Vec<f64>,
    pub mu: Vec<f64>,
    /// Some period admitted a continuum of optimal flows.
    pub nonunique: bool,
}

/// Multiplier bracket `lo <= hi` enclosing the segment's multiplier.
#[derive(Debug, Clone, Copy)]
struct Bracket {
    lo: f64,
    hi: f64,
}

struct Segment {
    end: usize,
    mu: f64,
    bracket: Bracket,
    target: (f64, f64),
}

/// Levels reachable from the segment start, keyed by the multiplier bounds
/// they were computed for.
#[derive(Clone, Copy)]
struct Joint {
    mus: (f64, f64),
    next: usize,
    lo: f64,
    hi: f64,
    /// Last period where the highest path was held at the ceiling.
    capped: Option<usize>,
    /// Last period where the lowest path was held at the floor.
    raised: Option<usize>,
}

impl Joint {
    fn new(a_mu: f64, b_mu: f64, s: usize, level: f64) -> Self {
        Joint {
            mus: (a_mu, b_mu),
            next: s,
            lo: level,
            hi: level,
            capped: None,
            raised: None,
        }
    }
}

const MAX_BISECT: usize = 200;

fn level_tol(v: f64) -> f64 {
    1e-11 * (1.0 + v.abs())
}

struct Scanner<'a, C> {
    costs: &'a [C],
    b: &'a Bounds,
}

impl<C: PeriodCost> Scanner<'_, C> {
    fn resp(&self, t: usize, mu: f64) -> (f64, f64) {
        self.costs[t].response(mu, self.b.rate_lo[t], self.b.rate_hi[t])
    }

    fn sums(&self, s: usize, u: usize, mu: f64) -> (f64, f64) {
        (s..=u).fold((0.0, 0.0), |(a, b), t| {
            let (l, h) = self.resp(t, mu);
            (a + l, b + h)
        })
    }

    /// Adjacent-float bracket around the sign change of a nondecreasing `g`,
    /// given `g(a) = ga` on the holding side and `g(b) = gb` beyond it. With
    /// `strict` the holding side is `g < 0`, else `g <= 0`.
    ///
    /// Illinois-style false position, since the segment sums are piecewise
    /// linear in the multiplier, with a bisection step every fourth try.
    fn bisect(
        &self,
        (mut a, mut ga): (f64, f64),
        (mut b, mut gb): (f64, f64),
        strict: bool,
        g: impl Fn(f64) -> f64,
    ) -> Bracket {
        let holds = |v: f64| if strict { v < 0.0 } else { v <= 0.0 };
        let mut side = 0i8;
        for it in 0..MAX_BISECT {
            if a.next_up() >= b {
                break;
            }
            let mid = 0.5 * (a + b);
            let mut m = if it % 4 == 3 || !(gb > ga) {
                mid
            } else {
                a + (b - a) * (-ga / (gb - ga))
            };
            if !(m > a && m < b) {
                m = mid;
            }
            let v = g(m);
            if holds(v) {
                a = m;
                ga = v;
                let n = m.next_up();
                if n < b {
                    let vn = g(n);
                    if !holds(vn) {
                        return Bracket { lo: a, hi: n };
                    }
                    a = n;
                    ga = vn;
                }
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            } else {
                b = m;
                gb = v;
                let p = m.next_down();
                if p > a {
                    let vp = g(p);
                    if holds(vp) {
                        return Bracket { lo: p, hi: b };
                    }
                    b = p;
                    gb = vp;
                }
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            }
        }
        Bracket { lo: a, hi: b }
    }

    /// Latest period in `from..u` whose level can sit on the floor (or the
    /// ceiling) under multiplier `mu`, with every earlier bound held. Flat stretches of the responses let
    /// the level reach the bound again after `from`; closing the segment
    /// earlier would leave later periods trading at `mu` on the wrong side.
    fn last_touch(
        &self,
        s: usize,
        from: usize,
        u: usize,
        mu: f64,
        level: f64,
        floor: bool,
    ) -> usize {
        let b = self.b;
        let (mut lo, mut hi) = (level, level);
        let mut e = from;
        for t in s..u {
            let (l, h) = self.resp(t, mu);
            lo = (lo + l).max(b.level_lo[t]);
            hi = (hi + h).min(b.level_hi[t]);
            let tol = level_tol(b.level_hi[t]);
            let touches = if floor {
                lo <= b.level_lo[t] + tol
            } else {
                hi >= b.level_hi[t] - tol
            };
            if t > from && touches {
                e = t;
            }
        }
        e
    }

    fn mu_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in 0..self.costs.len() {
            let (_, r) = self.costs[t].slopes(self.b.rate_lo[t]);
            let (l, _) = self.costs[t].slopes(self.b.rate_hi[t]);
            lo = lo.min(r).min(l);
            hi = hi.max(l).max(r);
        }
        let pad = 1.0 + 1e-6 * lo.abs().max(hi.abs());
        (lo - pad, hi + pad)
    }

    fn scan(&self, s: usize, level: f64, mu_range: (f64, f64)) -> Result<Segment> {
        let n = self.costs.len();
        let b = self.b;
        let (mut a_mu, mut b_mu) = mu_range;
        let mut a_br = Bracket { lo: a_mu, hi: a_mu };
        let mut b_br = Bracket { lo: b_mu, hi: b_mu };
        let mut ua: Option<usize> = None;
        let mut ub: Option<usize> = None;
        let (mut lo_a, mut hi_a) = (0.0, 0.0);
        let (mut lo_b, mut hi_b) = (0.0, 0.0);
        let mut joint: Option<Joint> = None;

        for u in s..n {
            let (la, ha) = self.resp(u, a_mu);
            let (lb, hb) = self.resp(u, b_mu);
            lo_a += la;
            hi_a += ha;
            lo_b += lb;
            hi_b += hb;
            let need_lo = b.level_lo[u] - level;
            let need_hi = b.level_hi[u] - level;
            let tol = level_tol(b.level_hi[u]);

            if hi_b < need_lo - tol {
                let e = ub.ok_or_else(|| {
                    Error::Numerical(format!("level floor unreachable at period {}", u + 1))
                })?;
                let e = self.last_touch(s, e, u, b_mu, level, false);
                return Ok(Segment {
                    end: e,
                    mu: b_mu,
                    bracket: b_br,
                    target: (b.level_hi[e], b.level_hi[e]),
                });
            }
            if lo_a > need_hi + tol {
                let e = ua.ok_or_else(|| {
                    Error::Numerical(format!("level ceiling unreachable at period {}", u + 1))
                })?;
                let e = self.last_touch(s, e, u, a_mu, level, true);
                return Ok(Segment {
                    end: e,
                    mu: a_mu,
                    bracket: a_br,
                    target: (b.level_lo[e], b.level_lo[e]),
                });
            }
            if lo_b > need_hi {
                let br = if lo_a <= need_hi {
                    self.bisect((a_mu, lo_a - need_hi), (b_mu, lo_b - need_hi), false, |m| {
                        self.sums(s, u, m).0 - need_hi
                    })
                } else {
                    Bracket { lo: a_mu, hi: a_mu }
                };
                b_mu = br.lo;
                b_br = br;
                ub = Some(u);
                (lo_b, hi_b) = self.sums(s, u, b_mu);
            }
            if hi_a < need_lo {
                let br = if hi_b >= need_lo {
                    self.bisect((a_mu, hi_a - need_lo), (b_mu, hi_b - need_lo), true, |m| {
                        self.sums(s, u, m).1 - need_lo
                    })
                } else {
                    Bracket { lo: b_mu, hi: b_mu }
                };
                a_mu = br.hi;
                a_br = br;
                ua = Some(u);
                (lo_a, hi_a) = self.sums(s, u, a_mu);
            }

            // Each prefix is satisfiable on its own, but where response
            // boxes are wide maybe not all at once. Track the levels
            // reachable with every bound held, taking the lowest flows at A
            // and the highest at B.
            let mut jt = match joint {
                Some(j) if j.mus == (a_mu, b_mu) => j,
                _ => Joint::new(a_mu, b_mu, s, level),
            };
            for t in jt.next..=u {
                let lo = jt.lo + self.resp(t, a_mu).0;
                let hi = jt.hi + self.resp(t, b_mu).1;
                let tol = level_tol(b.level_hi[t]);
                if hi < b.level_lo[t] - tol {
                    // even the highest path falls short: the level must
                    // already be full where that path was last capped
                    let e = jt.capped.ok_or_else(|| {
                        Error::Numerical(format!("level floor unreachable at period {}", t + 1))
                    })?;
                    return Ok(Segment {
                        end: e,
                        mu: b_mu,
                        bracket: b_br,
                        target: (b.level_hi[e], b.level_hi[e]),
                    });
                }
                if lo > b.level_hi[t] + tol {
                    let e = jt.raised.ok_or_else(|| {
                        Error::Numerical(format!("level ceiling unreachable at period {}", t + 1))
                    })?;
                    return Ok(Segment {
                        end: e,
                        mu: a_mu,
                        bracket: a_br,
                        target: (b.level_lo[e], b.level_lo[e]),
                    });
                }
                if hi > b.level_hi[t] {
                    jt.capped = Some(t);
                }
                if lo < b.level_lo[t] {
                    jt.raised = Some(t);
                }
                jt.lo = lo.max(b.level_lo[t]);
                jt.hi = hi.min(b.level_hi[t]);
                jt.next = t + 1;
            }
            joint = Some(jt);
        }

        let e = n - 1;
        let target = (b.level_lo[e], b.level_hi[e]);
        let (mu, bracket) = if b.salvage <= a_mu {
            (a_mu, a_br)
        } else if b.salvage >= b_mu {
            (b_mu, b_br)
        } else {
            (
                b.salvage,
                Bracket {
                    lo: b.salvage,
                    hi: b.salvage,
                },
            )
        };
        Ok(Segment {
            end: e,
            mu,
            bracket,
            target,
        })
    }
}

/// Minimises `sum_t costs[t](x_t)` subject to the bounds and returns the
/// flows with a multiplier per period.
pub fn solve<C: PeriodCost>(costs: &[C], b: &Bounds) -> Result<Solved> {
    b.check()?;
    if costs.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "{} costs for {} periods",
            costs.len(),
            b.len()
        )));
    }
    b.reachable()?;
    let sc = Scanner { costs, b };
    let range = sc.mu_range();
    let n = costs.len();
    let mut flows = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut nonunique = false;
    let mut s = 0;
    let mut level = b.start;
    while s < n {
        let seg = sc.scan(s, level, range)?;
        nonunique |= fill(&sc, s, level, &seg, &mut flows)?;
        for m in &mut mu[s..=seg.end] {
            *m = seg.mu;
        }
        level = if seg.target.0 == seg.target.1 {
            seg.target.0
        } else {
            level + flows[s..=seg.end].iter().sum::<f64>()
        };
        s = seg.end + 1;
    }
    Ok(Solved {
        flows,
        mu,
        nonunique,
    })
}

/// Chooses flows on `s..=seg.end` from the response boxes of the segment
/// multiplier. Returns whether a box was wide (non-unique optimum).
fn fill<C: PeriodCost>(
    sc: &Scanner<'_, C>,
    s: usize,
    level: f64,
    seg: &Segment,
    flows: &mut [f64],
) -> Result<bool> {
    let b = sc.b;
    let e = seg.end;
    let mut lo = Vec::with_capacity(e - s + 1);
    let mut up = Vec::with_capacity(e - s + 1);
    for t in s..=e {
        let (l0, h0) = sc.resp(t, seg.bracket.lo);
        let (_, h1) = sc.resp(t, seg.bracket.hi);
        lo.push(l0);
        up.push(h0.max(h1));
    }
    let scale = 1.0 + b.level_hi[s..=e].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let wide = lo.iter().zip(&up).any(|(l, u)| u - l > 1e-9 * scale);

    if wide {
        // minimum-norm selection inside the boxes
        let sub_costs: Vec<PiecewiseQuadratic> = lo
            .iter()
            .zip(&up)
            .map(|(&l, &u)| PiecewiseQuadratic::half_square(1.0, l, u))
            .collect();
        let mut level_lo = b.level_lo[s..=e].to_vec();
        let mut level_hi = b.level_hi[s..=e].to_vec();
        let k = e - s;
        level_lo[k] = seg.target.0;
        level_hi[k] = seg.target.1;
        let sub = Bounds {
            rate_lo: lo,
            rate_hi: up,
            level_lo,
            level_hi,
            start: level,
            salvage: 0.0,
        };
        let sol = solve(&sub_costs, &sub).map_err(|err| {
            Error::Numerical(format!(
                "selection among optimal flows failed on periods {}..{}: {err}",
                s + 1,
                e + 1
            ))
        })?;
        flows[s..=e].copy_from_slice(&sol.flows);
        return Ok(true);
    }

    let sum_lo: f64 = lo.iter().sum();
    let sum_up: f64 = up.iter().sum();
    let want_lo = seg.target.0 - level;
    let want_hi = seg.target.1 - level;
    let c = (0.5 * (sum_lo + sum_up)).clamp(want_lo, want_hi);
    let theta = if sum_up > sum_lo {
        ((c - sum_lo) / (sum_up - sum_lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    for (i, t) in (s..=e).enumerate() {
        flows[t] = lo[i] + theta * (up[i] - lo[i]);
    }
    let mut r = c - flows[s..=e].iter().sum::<f64>();
    if r.abs() > 1e-7 * scale {
        return Err(Error::Numerical(format!(
            "segment ending at period {} misses its level by {r}",
            e + 1
        )));
    }
    // absorb rounding on the latest periods with rate slack
    for t in (s..=e).rev() {
        if r == 0.0 {
            break;
        }
        let x = (flows[t] + r).clamp(b.rate_lo[t], b.rate_hi[t]);
        r -= x - flows[t];
        flows[t] = x;
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{own_cost, Cost};
    use crate::market::PriceFunction;

    fn bounds(n: usize, e: f64, p: f64, s0: f64, st: f64) -> Bounds {
        let mut level_lo = vec![0.0; n];
        let mut level_hi = vec![e; n];
        level_lo[n - 1] = st;
        level_hi[n - 1] = st;
        Bounds {
            rate_lo: vec![-p; n],
            rate_hi: vec![p; n],
            level_lo,
            level_hi,
            start: s0,
            salvage: 0.0,
        }
    }

    fn costs(pbar: &[f64], slope: f64, eps: f64, p: f64) -> Vec<Cost> {
        pbar.iter()
            .map(|&pb| {
                let pf = PriceFunction::linear(pb, slope, (-100.0, 100.0)).unwrap();
                own_cost(&pf, eps, 0.0, -p, p).unwrap()
            })
            .collect()
    }

    #[test]
    fn two_period_interior() {
        let c = costs(&[10.0, 20.0], 1.0, 1.0, 10.0);
        let sol = solve(&c, &bounds(2, 10.0, 10.0, 0.0, 0.0)).unwrap();
        assert!((sol.flows[0] - 2.5).abs() < 1e-12);
        assert!((sol.flows[1] + 2.5).abs() < 1e-12);
        assert!((sol.mu[0] - 15.0).abs() < 1e-9);
    }

    #[test]
    fn flat_prices_from_a_full_store() {
        // zero slopes: the buy threshold of period 1 lies below the sell
        // threshold of period 2, and the store cannot take more at period 1
        let (eps, e, pin, pout) = (0.9938388447652091, 1.4497011170866259, 0.8963, 1.6984);
        let c: Vec<Cost> = [57.08273973645708, 58.81124982027638]
            .iter()
            .map(|&pb| {
                let pf = PriceFunction::linear(pb, 0.0, (-pout, pin)).unwrap();
                own_cost(&pf, eps, 0.0, -pout, pin).unwrap()
            })
            .collect();
        let b = Bounds {
            rate_lo: vec![-pout; 2],
            rate_hi: vec![pin; 2],
            level_lo: vec![0.0, 0.0],
            level_hi: vec![e, 0.0],
            start: e,
            salvage: 0.0,
        };
        let sol = solve(&c, &b).unwrap();
        assert!(sol.flows[0].abs() < 1e-12);
        assert!((sol.flows[1] + e).abs() < 1e-12);
        assert!(sol.mu[1] >= sol.mu[0]);
    }

    #[test]
    fn segment_runs_to_the_last_empty_period() {
        // flat period 2 lets the store empty there or one period later; the
        // sloped period 3 must share period 2's multiplier
        let (eps, pin, pout) = (0.8716928976267867, 0.738018804540269, 1.9540252399794573);
        let coef = [
            (10.0, 0.0),
            (50.259308444849374, 0.0),
            (50.40741719521815, 10.424856519121809),
            (10.0, 0.0),
        ];
        let c: Vec<Cost> = coef
            .iter()
            .map(|&(p, sl)| {
                let pf = PriceFunction::linear(p, sl, (-pout, pin)).unwrap();
                own_cost(&pf, eps, 0.0, -pout, pin).unwrap()
            })
            .collect();
        let mut b = bounds(4, 3.7771280802452267, pin, 0.0, 0.0);
        b.rate_lo = vec![-pout; 4];
        let sol = solve(&c, &b).unwrap();
        // period 3 sells until its marginal revenue falls to period 2's price
        let y = (50.40741719521815 - 50.259308444849374) / (2.0 * 10.424856519121809 * eps);
        assert!((sol.flows[2] + y).abs() < 1e-9, "{:?}", sol.flows);
        assert!((sol.mu[2] - sol.mu[1]).abs() < 1e-9);
    }

    #[test]
    fn rate_saturating() {
        let c = costs(&[10.0, 10.0, 30.0, 30.0], 1.0, 1.0, 1.0);
        let sol = solve(&c, &bounds(4, 10.0, 1.0, 0.0, 0.0)).unwrap();
        for (x, w) in sol.flows.iter().zip([1.0, 1.0, -1.0, -1.0]) {
            assert!((x - w).abs() < 1e-12);
        }
    }

    #[test]
    fn capacity_binds() {
        let c = costs(&[10.0, 10.0, 30.0, 30.0], 0.1, 1.0, 10.0);
        let sol = solve(&c, &bounds(4, 2.0, 10.0, 0.0, 0.0)).unwrap();
        let lv: Vec<f64> = sol
            .flows
            .iter()
            .scan(0.0, |s, x| {
                *s += x;
                Some(*s)
            })
            .collect();
        assert!((lv[1] - 2.0).abs() < 1e-12);
        assert!((sol.flows[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_prices_choose_min_norm() {
        let c = costs(&[10.0, 10.0, 10.0], 0.0, 1.0, 1.0);
        let sol = solve(&c, &bounds(3, 5.0, 1.0, 0.0, 0.0)).unwrap();
        assert!(sol.flows.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn price_taker_cycles_fully() {
        let c = costs(&[10.0, 30.0, 10.0, 30.0], 0.0, 1.0, 1.0);
        let sol = solve(&c, &bounds(4, 5.0, 1.0, 0.0, 0.0)).unwrap();
        for (x, w) in sol.flows.iter().zip([1.0, -1.0, 1.0, -1.0]) {
            assert!((x - w).abs() < 1e-12, "{:?}", sol.flows);
        }
    }

    #[test]
    fn infeasible_terminal_detected() {
        let c = costs(&[10.0, 20.0], 1.0, 1.0, 1.0);
        let err = solve(&c, &bounds(2, 10.0, 1.0, 0.0, 5.0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn free_terminal_sells_down_at_zero_salvage() {
        let c = costs(&[10.0, 20.0], 1.0, 1.0, 10.0);
        let mut b = bounds(2, 10.0, 10.0, 4.0, 0.0);
        b.level_lo[1] = 0.0;
        b.level_hi[1] = 10.0;
        let sol = solve(&c, &b).unwrap();
        let end = 4.0 + sol.flows[0] + sol.flows[1];
        assert!(end.abs() < 1e-12);
    }
}
