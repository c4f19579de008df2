//! Several stores sharing one market: Cournot (Nash) equilibria, the
//! cooperative optimum, and structural checks on the results.

use serde::{Deserialize, Serialize};

use crate::cost::{joint_cost, Cost, PiecewiseQuadratic};
use crate::dispatch::{optimize_single, optimize_with_costs, solve, Bounds};
use crate::error::{Error, Result};
use crate::market::{clearing_prices, PriceFunction};
use crate::store::{eff_map, feasible, store_cost, FlowVector, Schedule, StoreSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Nash,
    Cooperative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub schedules: Vec<Schedule>,
    pub profits: Vec<f64>,
    pub clearing_prices: Vec<f64>,
    pub iterations: usize,
    /// Largest profit gain any single store could still obtain alone.
    pub br_residual: f64,
    pub mode: Mode,
    pub converged: bool,
    /// Cooperative results from coordinate descent need not be global.
    pub local_optimum: bool,
    pub warnings: Vec<String>,
    /// Potential after every best-response step (linear prices only).
    pub potential_trace: Vec<f64>,
}

impl EquilibriumResult {
    pub fn total_profit(&self) -> f64 {
        self.profits.iter().sum()
    }

    pub fn flows(&self) -> Vec<FlowVector> {
        self.schedules.iter().map(Schedule::flows).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricNashResult {
    pub per_store_flows: FlowVector,
    pub lambda_star: f64,
    pub per_store_profit: f64,
    pub n: usize,
    /// `max_t |h(x)(pbar + (n+1) p' h(x)) - lambda x|`.
    pub balance_residual: f64,
}

/// Default equilibrium tolerance for a given total profit.
pub fn equilibrium_tol(total_profit: f64) -> f64 {
    1e-9f64.max(1e-7 * total_profit.abs())
}

pub const MAX_SWEEPS: usize = 500;
const FLOW_TOL: f64 = 1e-9;
const LINEAR_FLOW_TOL: f64 = 1e-11;
const LINEAR_MAX_SWEEPS: usize = 20_000;

fn check_inputs(specs: &[StoreSpec], prices: &[PriceFunction]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("at least one store required".into()));
    }
    if prices.is_empty() {
        return Err(Error::InvalidArgument("empty horizon".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        s.validate()
            .map_err(|e| Error::InvalidArgument(format!("store {i}: {e}")))?;
        Bounds::from_spec(s, prices.len())
            .reachable()
            .map_err(|e| Error::Infeasible(format!("store {i}: {e}")))?;
    }
    Ok(())
}

/// Market-side aggregate of all stores except `skip`.
fn others(specs: &[StoreSpec], flows: &[Vec<f64>], skip: usize, t_len: usize) -> FlowVector {
    let mut k = vec![0.0; t_len];
    for (i, (s, x)) in specs.iter().zip(flows).enumerate() {
        if i != skip {
            for (a, &v) in k.iter_mut().zip(x) {
                *a += eff_map(s.efficiency, v);
            }
        }
    }
    FlowVector(k)
}

fn linear_coefficients(prices: &[PriceFunction]) -> Option<Vec<(f64, f64)>> {
    prices
        .iter()
        .map(PriceFunction::linear_coefficients)
        .collect()
}

fn potential_of(specs: &[StoreSpec], coef: &[(f64, f64)], flows: &[Vec<f64>]) -> f64 {
    let mut v = 0.0;
    for (t, &(pbar, slope)) in coef.iter().enumerate() {
        let (mut sum, mut sq) = (0.0, 0.0);
        for (s, x) in specs.iter().zip(flows) {
            let h = eff_map(s.efficiency, x[t]);
            sum += h;
            sq += h * h;
        }
        v += pbar * sum + 0.5 * slope * (sq + sum * sum);
    }
    v
}

/// Exact potential of the linear-price game:
/// `sum_t [pbar_t H_t + p'_t (sum_i h_it^2 + H_t^2) / 2]`.
pub fn potential_value(
    specs: &[StoreSpec],
    prices: &[PriceFunction],
    schedules: &[Schedule],
) -> Result<f64> {
    let coef = linear_coefficients(prices)
        .ok_or_else(|| Error::Unsupported("potential requires linear prices".into()))?;
    if specs.len() != schedules.len() {
        return Err(Error::InvalidArgument("one schedule per store".into()));
    }
    let flows: Vec<Vec<f64>> = schedules.iter().map(|s| s.flows().0).collect();
    if flows.iter().any(|f| f.len() != prices.len()) {
        return Err(Error::InvalidArgument("schedule horizon mismatch".into()));
    }
    Ok(potential_of(specs, &coef, &flows))
}

/// No trade, or the smallest feasible flows when a store must change level.
fn default_init(specs: &[StoreSpec], t_len: usize) -> Result<Vec<Vec<f64>>> {
    specs
        .iter()
        .map(|s| {
            let b = Bounds::from_spec(s, t_len);
            let costs = vec![PiecewiseQuadratic::half_square(1.0, -s.rate_out, s.rate_in); t_len];
            Ok(solve(&costs, &b)?.flows)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    specs: &[StoreSpec],
    prices: &[PriceFunction],
    flows: Vec<Vec<f64>>,
    mode: Mode,
    iterations: usize,
    converged: bool,
    warnings: Vec<String>,
    potential_trace: Vec<f64>,
) -> Result<EquilibriumResult> {
    let t_len = prices.len();
    let schedules: Vec<Schedule> = specs
        .iter()
        .zip(&flows)
        .map(|(s, x)| Schedule::from_flows(s.level_start, &FlowVector(x.clone())))
        .collect();
    let mut profits = Vec::with_capacity(specs.len());
    for (j, s) in specs.iter().enumerate() {
        let k = others(specs, &flows, j, t_len);
        profits.push(-store_cost(
            &FlowVector(flows[j].clone()),
            &k,
            prices,
            s.efficiency,
        )?);
    }
    let cp = clearing_prices(prices, specs, &schedules)?;
    let br = br_residual(specs, prices, &flows, &profits)?;
    Ok(EquilibriumResult {
        schedules,
        profits,
        clearing_prices: cp,
        iterations,
        br_residual: br,
        mode,
        converged,
        local_optimum: mode == Mode::Cooperative,
        warnings,
        potential_trace,
    })
}

/// Largest profit improvement any store gains by re-optimising alone.
fn br_residual(
    specs: &[StoreSpec],
    prices: &[PriceFunction],
    flows: &[Vec<f64>],
    profits: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (j, s) in specs.iter().enumerate() {
        let k = others(specs, flows, j, prices.len());
        let best = optimize_single(s, prices, &k)?;
        worst = worst.max(best.profit() - profits[j]);
    }
    Ok(worst)
}

/// Cyclic best responses in store order until a full sweep changes no
/// store's profit by more than `tol` and moves no flow by more than 1e-9.
/// `init` defaults to no trade, or to the smallest feasible flows for a
/// store whose final level differs from its initial one.
pub fn nash_best_response(
    specs: &[StoreSpec],
    prices: &[PriceFunction],
    init: Option<&[Schedule]>,
    tol: Option<f64>,
    max_sweeps: usize,
) -> Result<EquilibriumResult> {
    check_inputs(specs, prices)?;
    let t_len = prices.len();
    let mut flows = match init {
        Some(s) => {
            if s.len() != specs.len() {
                return Err(Error::InvalidArgument(
                    "one initial schedule per store".into(),
                ));
            }
            for (i, (spec, sch)) in specs.iter().zip(s).enumerate() {
                if !feasible(spec, sch, crate::store::FEASIBILITY_TOL).ok {
                    return Err(Error::InvalidArgument(format!(
                        "initial schedule {i} is infeasible"
                    )));
                }
            }
            s.iter().map(|x| x.flows().0).collect()
        }
        None => default_init(specs, t_len)?,
    };
    let coef = linear_coefficients(prices);
    let mut trace = Vec::new();
    if let Some(c) = &coef {
        trace.push(potential_of(specs, c, &flows));
    }
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut gain: f64 = 0.0;
        let mut moved: f64 = 0.0;
        let mut total = 0.0;
        for (j, s) in specs.iter().enumerate() {
            let k = others(specs, &flows, j, t_len);
            let before = store_cost(&FlowVector(flows[j].clone()), &k, prices, s.efficiency)?;
            let sol = optimize_single(s, prices, &k)?;
            let x = sol.flows().0;
            gain = gain.max(before - sol.objective);
            moved = flows[j]
                .iter()
                .zip(&x)
                .fold(moved, |m, (a, b)| m.max((a - b).abs()));
            flows[j] = x;
            total += sol.profit();
            if let Some(c) = &coef {
                trace.push(potential_of(specs, c, &flows));
            }
        }
        let eq_tol = tol.unwrap_or_else(|| equilibrium_tol(total));
        if gain <= eq_tol && moved <= FLOW_TOL {
            converged = true;
            break;
        }
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "best response did not converge within {max_sweeps} sweeps"
        ));
    }
    let mut r = finish(
        specs,
        prices,
        flows,
        Mode::Nash,
        sweeps,
        converged,
        warnings,
        trace,
    )?;
    let eq_tol = tol.unwrap_or_else(|| equilibrium_tol(r.total_profit()));
    if r.converged && r.br_residual > eq_tol {
        r.converged = false;
        r.warnings.push(format!(
            "best-response residual {} above tolerance",
            r.br_residual
        ));
    }
    Ok(r)
}

/// Block of the potential belonging to one store given the others'
/// aggregate `k`: `(pbar + p' k) h + p' h^2`.
fn potential_block(pbar: f64, slope: f64, k: f64, eps: f64, lo: f64, hi: f64) -> Result<Cost> {
    let b = pbar + slope * k;
    let pq = if lo < 0.0 && hi > 0.0 {
        PiecewiseQuadratic::new(
            vec![lo, 0.0, hi],
            vec![[slope * eps * eps, eps * b, 0.0], [slope, b, 0.0]],
        )?
    } else if hi <= 0.0 {
        PiecewiseQuadratic::new(vec![lo, hi], vec![[slope * eps * eps, eps * b, 0.0]])?
    } else {
        PiecewiseQuadratic::new(vec![lo, hi], vec![[slope, b, 0.0]])?
    };
    Ok(Cost::Pq(pq))
}

/// Unique equilibrium for linear, strictly increasing prices, found by
/// minimising the potential with block coordinate descent (alternating
/// forward and backward sweeps). Falls back to best responses with a
/// warning when some slope is zero.
pub fn nash_linear(specs: &[StoreSpec], prices: &[PriceFunction]) -> Result<EquilibriumResult> {
    check_inputs(specs, prices)?;
    let coef = linear_coefficients(prices).ok_or_else(|| {
        Error::Unsupported("potential minimisation requires linear prices".into())
    })?;
    if coef.iter().any(|&(_, s)| !(s > 0.0)) {
        let mut r = nash_best_response(specs, prices, None, None, MAX_SWEEPS)?;
        r.warnings
            .push("zero price slope: equilibrium may not be unique".into());
        return Ok(r);
    }
    let t_len = prices.len();
    let n = specs.len();
    let mut flows = default_init(specs, t_len)?;
    let mut pot = potential_of(specs, &coef, &flows);
    let mut trace = vec![pot];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < LINEAR_MAX_SWEEPS {
        let order: Vec<usize> = if sweeps % 2 == 0 {
            (0..n).collect()
        } else {
            (0..n).rev().collect()
        };
        sweeps += 1;
        let mut moved: f64 = 0.0;
        for j in order {
            let s = &specs[j];
            let k = others(specs, &flows, j, t_len);
            let costs: Vec<Cost> = coef
                .iter()
                .zip(&k.0)
                .map(|(&(pb, sl), &kt)| {
                    potential_block(pb, sl, kt, s.efficiency, -s.rate_out, s.rate_in)
                })
                .collect::<Result<_>>()?;
            let sol = optimize_with_costs(&costs, &Bounds::from_spec(s, t_len))?;
            let x = sol.flows().0;
            moved = flows[j]
                .iter()
                .zip(&x)
                .fold(moved, |m, (a, b)| m.max((a - b).abs()));
            flows[j] = x;
        }
        let next = potential_of(specs, &coef, &flows);
        trace.push(next);
        let drop = pot - next;
        pot = next;
        let scale = 1.0
            + specs
                .iter()
                .fold(0.0f64, |m, s| m.max(s.rate_in.max(s.rate_out)));
        if drop < 1e-10 * (1.0 + pot.abs()) && moved <= LINEAR_FLOW_TOL * scale {
            converged = true;
            break;
        }
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "potential minimisation did not converge within {LINEAR_MAX_SWEEPS} sweeps"
        ));
    }
    finish(
        specs,
        prices,
        flows,
        Mode::Nash,
        sweeps,
        converged,
        warnings,
        trace,
    )
}

/// Equilibrium of `n` identical stores under linear, strictly increasing
/// prices in one solve. At a symmetric point each store's marginal cost
/// `pbar + p'(2h + K)` with `K = (n - 1) h` equals that of a lone store
/// facing slope `(n + 1) p' / 2`, so that store's optimum is the (unique)
/// equilibrium. `Ok(None)` when the stores differ or prices are not
/// linear with positive slopes. The returned `br_residual` is computed by
/// independent best responses.
pub fn nash_symmetric(
    specs: &[StoreSpec],
    prices: &[PriceFunction],
) -> Result<Option<EquilibriumResult>> {
    check_inputs(specs, prices)?;
    let spec = &specs[0];
    if specs.iter().any(|s| s != spec) {
        return Ok(None);
    }
    let Some(coef) = linear_coefficients(prices) else {
        return Ok(None);
    };
    if coef.iter().any(|&(_, s)| !(s > 0.0)) {
        return Ok(None);
    }
    let n = specs.len();
    let stretch = 0.5 * (n + 1) as f64;
    let reduced: Vec<PriceFunction> = prices
        .iter()
        .zip(&coef)
        .map(|(pf, &(pb, sl))| PriceFunction::linear(pb, stretch * sl, pf.valid_range))
        .collect::<Result<_>>()?;
    let sol = optimize_single(spec, &reduced, &FlowVector::zeros(prices.len()))?;
    let x = sol.flows().0;
    finish(
        specs,
        prices,
        vec![x; n],
        Mode::Nash,
        1,
        true,
        vec![],
        vec![],
    )
    .map(Some)
}

/// Joint optimum of all stores by coordinate descent; each store in turn
/// minimises the total cost of all stores given the others' flows.
pub fn cooperative(specs: &[StoreSpec], prices: &[PriceFunction]) -> Result<EquilibriumResult> {
    check_inputs(specs, prices)?;
    let t_len = prices.len();
    let mut flows = default_init(specs, t_len)?;
    let joint = |flows: &[Vec<f64>]| -> Result<f64> {
        let mut c = 0.0;
        for t in 0..t_len {
            let h: f64 = specs
                .iter()
                .zip(flows)
                .map(|(s, x)| eff_map(s.efficiency, x[t]))
                .sum();
            c += h * crate::market::price_at(&prices[t], h)?;
        }
        Ok(c)
    };
    let mut obj = joint(&flows)?;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut moved: f64 = 0.0;
        for (j, s) in specs.iter().enumerate() {
            let k = others(specs, &flows, j, t_len);
            let costs: Vec<Cost> = prices
                .iter()
                .zip(&k.0)
                .map(|(pf, &kt)| joint_cost(pf, s.efficiency, kt, -s.rate_out, s.rate_in))
                .collect::<Result<_>>()?;
            let sol = optimize_with_costs(&costs, &Bounds::from_spec(s, t_len))?;
            let x = sol.flows().0;
            moved = flows[j]
                .iter()
                .zip(&x)
                .fold(moved, |m, (a, b)| m.max((a - b).abs()));
            flows[j] = x;
        }
        let next = joint(&flows)?;
        let gain = obj - next;
        obj = next;
        if gain < equilibrium_tol(obj) && moved <= FLOW_TOL {
            converged = true;
            break;
        }
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "coordinate descent did not settle within {MAX_SWEEPS} sweeps"
        ));
    }
    finish(
        specs,
        prices,
        flows,
        Mode::Cooperative,
        sweeps,
        converged,
        warnings,
        vec![],
    )
}

/// Solves the single store with summed capacities and rates and splits its
/// flows in proportion to capacity. `None` when efficiencies differ or the
/// split violates some store's constraints.
pub fn aggregate_shortcut(
    specs: &[StoreSpec],
    prices: &[PriceFunction],
) -> Result<Option<EquilibriumResult>> {
    check_inputs(specs, prices)?;
    let eps = specs[0].efficiency;
    if specs.iter().any(|s| s.efficiency != eps) {
        return Ok(None);
    }
    let sum = |f: fn(&StoreSpec) -> f64| specs.iter().map(f).sum::<f64>();
    let agg = StoreSpec::new(
        sum(|s| s.capacity),
        sum(|s| s.rate_in),
        sum(|s| s.rate_out),
        eps,
        sum(|s| s.level_start),
        sum(|s| s.level_end),
    )?;
    let sol = optimize_single(&agg, prices, &FlowVector::zeros(prices.len()))?;
    let x = sol.flows().0;
    let mut flows = Vec::with_capacity(specs.len());
    for s in specs {
        let kappa = s.capacity / agg.capacity;
        let xi: Vec<f64> = x.iter().map(|v| kappa * v).collect();
        let sch = Schedule::from_flows(s.level_start, &FlowVector(xi.clone()));
        if !feasible(s, &sch, 1e-8 * (1.0 + s.capacity)).ok {
            return Ok(None);
        }
        flows.push(xi);
    }
    let mut r = finish(
        specs,
        prices,
        flows,
        Mode::Cooperative,
        1,
        true,
        vec![],
        vec![],
    )?;
    r.local_optimum = false;
    Ok(Some(r))
}

/// Symmetric equilibrium of `n` identical stores when no level or rate
/// bound binds: per-period flows from the three-branch balance rule with
/// the multiplier chosen so that the flows sum to zero.
pub fn unconstrained_symmetric_nash(
    n: usize,
    prices: &[PriceFunction],
    eps: f64,
    s0: f64,
) -> Result<SymmetricNashResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(
            "efficiency must lie in (0, 1]".into(),
        ));
    }
    let coef = linear_coefficients(prices)
        .ok_or_else(|| Error::Unsupported("closed form requires linear prices".into()))?;
    if coef.is_empty() || coef.iter().any(|&(p, s)| !(s > 0.0) || !(p > 0.0)) {
        return Err(Error::Precondition(
            "need positive base prices and slopes".into(),
        ));
    }
    let pmin = coef.iter().map(|&(p, _)| p).fold(f64::INFINITY, f64::min);
    let pmax = coef
        .iter()
        .map(|&(p, _)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    if eps * pmax <= pmin {
        // no round trip pays
        return Ok(SymmetricNashResult {
            per_store_flows: FlowVector::zeros(coef.len()),
            lambda_star: pmin,
            per_store_profit: 0.0,
            n,
            balance_residual: 0.0,
        });
    }
    let m = (n + 1) as f64;
    let flow = |lambda: f64, pbar: f64, slope: f64| -> f64 {
        if lambda > pbar {
            (lambda - pbar) / (m * slope)
        } else if lambda < eps * pbar {
            (lambda - eps * pbar) / (m * eps * eps * slope)
        } else {
            0.0
        }
    };
    let total = |lambda: f64| coef.iter().map(|&(p, s)| flow(lambda, p, s)).sum::<f64>();

    let mut lo = coef
        .iter()
        .map(|&(p, _)| eps * p)
        .fold(f64::INFINITY, f64::min);
    let mut hi = coef
        .iter()
        .map(|&(p, _)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut lambda = 0.5 * (lo + hi);
    // flows are affine in lambda on each branch: solve the branch exactly
    let (mut num, mut den) = (0.0, 0.0);
    for &(p, s) in &coef {
        if lambda > p {
            num += p / (m * s);
            den += 1.0 / (m * s);
        } else if lambda < eps * p {
            num += p / (m * eps * s);
            den += 1.0 / (m * eps * eps * s);
        }
    }
    if den > 0.0 {
        let exact = num / den;
        let same_branches = coef
            .iter()
            .all(|&(p, _)| (lambda > p) == (exact > p) && (lambda < eps * p) == (exact < eps * p));
        if same_branches {
            lambda = exact;
        }
    }

    let x: Vec<f64> = coef.iter().map(|&(p, s)| flow(lambda, p, s)).collect();
    let mut level = s0;
    for (t, &v) in x.iter().enumerate() {
        level += v;
        if level < -1e-9 * (1.0 + s0.abs()) {
            return Err(Error::Precondition(format!(
                "store empties below zero at period {} (level {level})",
                t + 1
            )));
        }
    }
    let mut profit = 0.0;
    let mut resid: f64 = 0.0;
    for (&(p, s), &v) in coef.iter().zip(&x) {
        let h = eff_map(eps, v);
        profit += s * h * h;
        resid = resid.max((h * (p + m * s * h) - lambda * v).abs());
    }
    Ok(SymmetricNashResult {
        per_store_flows: FlowVector(x),
        lambda_star: lambda,
        per_store_profit: profit,
        n,
        balance_residual: resid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// `(n, max_t |h(x_t^(n)) - 2 h(x_t^(1)) / (n + 1)|)`.
    pub discrepancies: Vec<(usize, f64)>,
}

impl ScalingReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.discrepancies.iter().fold(0.0, |m, &(_, d)| m.max(d))
    }
}

/// Compares the `n`-store equilibrium, with every store scaled by
/// `2 / (n + 1)`, against the single-store optimum.
pub fn scaling_check(
    base: &StoreSpec,
    prices: &[PriceFunction],
    n_list: &[usize],
) -> Result<ScalingReport> {
    let one = nash_linear(std::slice::from_ref(base), prices)?;
    let h1: Vec<f64> = one.flows()[0]
        .0
        .iter()
        .map(|&v| eff_map(base.efficiency, v))
        .collect();
    let mut discrepancies = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let k = 2.0 / (n + 1) as f64;
        let spec = base.scaled(k)?;
        let specs = vec![spec; n];
        let r = nash_linear(&specs, prices)?;
        let mut worst: f64 = 0.0;
        for f in r.flows() {
            for (&v, &h) in f.0.iter().zip(&h1) {
                worst = worst.max((eff_map(base.efficiency, v) - k * h).abs());
            }
        }
        discrepancies.push((n, worst));
    }
    Ok(ScalingReport { discrepancies })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrderingCheck {
    Ordered,
    /// First `(t, i, j)` with `E_i <= E_j` but `S_it > S_jt`.
    Violation {
        t: usize,
        i: usize,
        j: usize,
    },
    NotApplicable(String),
}

/// Levels ordered by capacity at every period, provided the stores share
/// rates and efficiency and their boundary levels are ordered likewise.
pub fn ordering_check(result: &EquilibriumResult, specs: &[StoreSpec]) -> OrderingCheck {
    const TOL: f64 = 1e-8;
    if specs.len() != result.schedules.len() || specs.is_empty() {
        return OrderingCheck::NotApplicable("store count mismatch".into());
    }
    let s0 = &specs[0];
    if specs.iter().any(|s| {
        s.rate_in != s0.rate_in || s.rate_out != s0.rate_out || s.efficiency != s0.efficiency
    }) {
        return OrderingCheck::NotApplicable("rates or efficiencies differ".into());
    }
    for (i, a) in specs.iter().enumerate() {
        for b in specs.iter().skip(i + 1) {
            let cap = a.capacity.total_cmp(&b.capacity);
            let st = a.level_start.total_cmp(&b.level_start);
            let en = a.level_end.total_cmp(&b.level_end);
            let consistent = |o: std::cmp::Ordering| o == cap || o.is_eq() || cap.is_eq();
            if !consistent(st) || !consistent(en) {
                return OrderingCheck::NotApplicable(
                    "boundary levels not ordered like capacities".into(),
                );
            }
        }
    }
    let t_len = result.schedules[0].levels.len();
    for t in 0..t_len {
        for i in 0..specs.len() {
            for j in 0..specs.len() {
                if i != j
                    && specs[i].capacity <= specs[j].capacity
                    && result.schedules[i].levels[t] > result.schedules[j].levels[t] + TOL
                {
                    return OrderingCheck::Violation { t, i, j };
                }
            }
        }
    }
    OrderingCheck::Ordered
}
