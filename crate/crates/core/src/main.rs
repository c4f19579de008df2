mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pricemaker::data::{
    format_price_csv, synth_prices, to_price_functions, Scenario, ScenarioConfig, SynthParams,
    TIMESTAMP_FORMAT,
};
use pricemaker::dispatch::{
    find_lambda_max, is_binding, optimize_single, sensitivity_capacity, sensitivity_rate,
    LambdaSearch, RateSide, CERT_TOL,
};
use pricemaker::equilibrium::{
    aggregate_shortcut, cooperative, equilibrium_tol, nash_best_response, nash_linear,
    nash_symmetric, EquilibriumResult, Mode, MAX_SWEEPS,
};
use pricemaker::market::{clear_two_period, PriceFunction, ResidualSupply, SupplyBid};
use pricemaker::store::{eff_map, FlowVector};
use pricemaker::welfare::{surplus_delta_approx, surplus_delta_exact, DemandModel};

use report::{Format, PeriodRow, RunReport, ScenarioEcho, Summary};

/// Optimal schedules for price-making energy stores.
#[derive(Parser)]
#[command(name = "pricemaker", version, about)]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, global = true, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for synthetic prices; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Residual / convergence tolerance deciding the exit status.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Capacity,
    RateIn,
    RateOut,
}

#[derive(Subcommand)]
enum Cmd {
    /// Profit-maximising schedule for a single store.
    Optimize {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Also search for the smallest market impact at which no
        /// constraint binds.
        #[arg(long)]
        lambda_max: bool,
    },
    /// Cournot equilibrium of the configured stores.
    Nash {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Schedules maximising the stores' combined profit.
    Coop {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Consumer-surplus change caused by the stores' equilibrium trades.
    Surplus {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Effect of relaxing one capacity or rate bound at period `t0`.
    Sensitivity {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Period whose bound is relaxed, 1-based.
        #[arg(long)]
        t0: usize,
        /// Amount added to the bound.
        #[arg(long)]
        delta: f64,
        /// Bound to relax.
        #[arg(long, value_enum)]
        target: Target,
    },
    /// Two-period supply-function clearing with linear residual supplies.
    Clearing2p {
        /// Period-one residual supply `intercept,slope`.
        #[arg(long, value_parser = pair)]
        r1: (f64, f64),
        /// Period-two residual supply `intercept,slope`.
        #[arg(long, value_parser = pair)]
        r2: (f64, f64),
        /// Storage bid in the price differential: `zero` or `intercept,slope`.
        #[arg(long, default_value = "zero")]
        bid: String,
        /// Price search range `lo,hi`.
        #[arg(long, value_parser = pair, default_value = "-1000,1000")]
        price_range: (f64, f64),
    },
    /// Write a synthetic half-hourly price series as CSV.
    Synth {
        /// Number of days of half-hourly prices.
        #[arg(long)]
        days: usize,
        #[arg(long, default_value_t = SynthParams::default().day_amp)]
        day_amp: f64,
        #[arg(long, default_value_t = SynthParams::default().week_amp)]
        week_amp: f64,
        #[arg(long, default_value_t = SynthParams::default().season_amp)]
        season_amp: f64,
        #[arg(long, default_value_t = SynthParams::default().base)]
        base: f64,
        #[arg(long, default_value_t = SynthParams::default().noise_sd)]
        noise_sd: f64,
    },
}

fn pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `a,b`")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

struct Loaded {
    scenario: Scenario,
    prices: Vec<PriceFunction>,
    echo: ScenarioEcho,
}

fn load(cfg: &ConfigArg, seed: Option<u64>) -> Result<Loaded> {
    let conf = ScenarioConfig::load(&cfg.config)
        .with_context(|| format!("reading {}", cfg.config.display()))?;
    let scenario = conf.build(seed)?;
    let prices = scenario.price_functions()?;
    let echo = ScenarioEcho {
        lambda: scenario.lambda,
        horizon: scenario.horizon(),
        price_source: match &conf.price_csv {
            Some(p) => p.display().to_string(),
            None => "synthetic".into(),
        },
        seed: conf
            .price_csv
            .is_none()
            .then(|| seed.or(conf.seed).unwrap_or(0)),
        stores: scenario.specs.clone(),
        demand: scenario.demand.as_ref().map(|d| d[0].clone()),
    };
    Ok(Loaded {
        scenario,
        prices,
        echo,
    })
}

fn rows(sc: &Scenario, res: &EquilibriumResult) -> Vec<PeriodRow> {
    let flows = res.flows();
    (0..sc.horizon())
        .map(|t| PeriodRow {
            t: t + 1,
            timestamp: sc.series.timestamps[t].format(TIMESTAMP_FORMAT).to_string(),
            pbar: sc.series.pbar[t],
            clearing_price: res.clearing_prices[t],
            levels: res.schedules.iter().map(|s| s.levels[t + 1]).collect(),
            flows: flows.iter().map(|f| f.0[t]).collect(),
            flow_delta: None,
        })
        .collect()
}

fn single(l: &Loaded, mode: Mode) -> Result<(EquilibriumResult, f64, bool)> {
    let spec = &l.scenario.specs[0];
    let sol = optimize_single(spec, &l.prices, &FlowVector::zeros(l.prices.len()))?;
    let clearing = l
        .scenario
        .clearing_prices(std::slice::from_ref(&sol.schedule))?;
    let binding = is_binding(spec, &sol);
    let res = EquilibriumResult {
        schedules: vec![sol.schedule.clone()],
        profits: vec![sol.profit()],
        clearing_prices: clearing,
        iterations: 1,
        br_residual: 0.0,
        mode,
        converged: true,
        local_optimum: false,
        warnings: vec![],
        potential_trace: vec![],
    };
    Ok((res, sol.kkt_residual, binding))
}

fn equilibrium(l: &Loaded, tol: Option<f64>) -> Result<(EquilibriumResult, &'static str)> {
    let specs = &l.scenario.specs;
    if specs.len() == 1 {
        return Ok((single(l, Mode::Nash)?.0, "single"));
    }
    if let Some(r) = nash_symmetric(specs, &l.prices)? {
        return Ok((r, "symmetric"));
    }
    if l.prices.iter().all(PriceFunction::is_linear) {
        Ok((nash_linear(specs, &l.prices)?, "potential"))
    } else {
        Ok((
            nash_best_response(specs, &l.prices, None, tol, MAX_SWEEPS)?,
            "best_response",
        ))
    }
}

fn equilibrium_summary(res: &EquilibriumResult, tol: Option<f64>, method: &str) -> Summary {
    let total = res.total_profit();
    let tol = tol.unwrap_or_else(|| equilibrium_tol(total));
    Summary {
        ok: res.converged && res.br_residual <= tol,
        method: Some(method.into()),
        profits: res.profits.clone(),
        total_profit: Some(total),
        br_residual: Some(res.br_residual),
        tolerance: Some(tol),
        iterations: Some(res.iterations),
        converged: Some(res.converged),
        warnings: res.warnings.clone(),
        ..Summary::default()
    }
}

fn cmd_optimize(l: Loaded, tol: Option<f64>, want_lambda_max: bool) -> Result<RunReport> {
    if l.scenario.specs.len() != 1 {
        bail!("n_stores: optimize needs exactly one store");
    }
    let (res, kkt, binding) = single(&l, Mode::Nash)?;
    let tol = tol.unwrap_or(CERT_TOL);
    let lambda_max = if want_lambda_max {
        find_lambda_max(
            &l.scenario.specs[0],
            &l.scenario.series.pbar,
            LambdaSearch::default(),
        )?
        .lambda
    } else {
        None
    };
    let summary = Summary {
        ok: kkt <= tol,
        method: Some("single".into()),
        profits: res.profits.clone(),
        total_profit: Some(res.total_profit()),
        kkt_residual: Some(kkt),
        tolerance: Some(tol),
        binding: Some(binding),
        lambda_max,
        ..Summary::default()
    };
    Ok(RunReport {
        command: "optimize".into(),
        periods: rows(&l.scenario, &res),
        scenario: Some(l.echo),
        summary,
    })
}

fn cmd_nash(l: Loaded, tol: Option<f64>) -> Result<RunReport> {
    let (res, method) = equilibrium(&l, tol)?;
    Ok(RunReport {
        command: "nash".into(),
        periods: rows(&l.scenario, &res),
        summary: equilibrium_summary(&res, tol, method),
        scenario: Some(l.echo),
    })
}

fn cmd_coop(l: Loaded, tol: Option<f64>) -> Result<RunReport> {
    let specs = &l.scenario.specs;
    let (res, method) = if specs.len() == 1 {
        (single(&l, Mode::Cooperative)?.0, "single")
    } else if let Some(r) = aggregate_shortcut(specs, &l.prices)? {
        (r, "aggregate")
    } else {
        (cooperative(specs, &l.prices)?, "coordinate_descent")
    };
    let mut summary = equilibrium_summary(&res, tol, method);
    // the residual measures unilateral gains, which a joint optimum may leave
    summary.ok = res.converged;
    Ok(RunReport {
        command: "coop".into(),
        periods: rows(&l.scenario, &res),
        summary,
        scenario: Some(l.echo),
    })
}

/// Exact and first-order surplus changes when the stores' aggregate
/// market-side trade is `h`.
fn surplus_pair(pf: &[PriceFunction], demand: &[DemandModel], h: &[f64]) -> Result<(f64, f64)> {
    let pbar: Vec<f64> = pf.iter().map(PriceFunction::base_price).collect();
    let with: Vec<f64> = pf
        .iter()
        .zip(h)
        .map(|(p, &q)| pricemaker::market::price_at(p, q))
        .collect::<pricemaker::Result<_>>()?;
    let slopes: Vec<f64> = pf
        .iter()
        .map(|p| p.linear_coefficients().map(|c| c.1))
        .collect::<Option<_>>()
        .ok_or_else(|| anyhow!("surplus approximation needs linear prices"))?;
    let d0: Vec<f64> = demand
        .iter()
        .zip(&pbar)
        .map(|(d, &p)| d.quantity(p))
        .collect();
    Ok((
        surplus_delta_exact(demand, &with, &pbar)?,
        surplus_delta_approx(h, &slopes, &d0)?,
    ))
}

fn cmd_surplus(l: Loaded, tol: Option<f64>) -> Result<RunReport> {
    let demand = l
        .scenario
        .demand
        .clone()
        .ok_or_else(|| anyhow!("demand: surplus needs `demand` or `demand_a`/`demand_b`"))?;
    let (res, method) = equilibrium(&l, tol)?;
    let specs = &l.scenario.specs;
    let t_len = l.prices.len();
    let mut h = vec![0.0; t_len];
    for (s, f) in specs.iter().zip(res.flows()) {
        for (a, x) in h.iter_mut().zip(f.0) {
            *a += eff_map(s.efficiency, x);
        }
    }
    let (exact, approx) = surplus_pair(&l.prices, &demand, &h)?;
    let half: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
    let (exact_h, approx_h) = surplus_pair(&l.prices, &demand, &half)?;
    let (err, err_h) = ((exact - approx).abs(), (exact_h - approx_h).abs());
    let mut summary = equilibrium_summary(&res, tol, method);
    summary.surplus_delta_exact = Some(exact);
    summary.surplus_delta_approx = Some(approx);
    summary.approx_error = Some(err);
    summary.approx_error_half = Some(err_h);
    summary.approx_error_ratio = (err_h > 0.0).then(|| err / err_h);
    Ok(RunReport {
        command: "surplus".into(),
        periods: rows(&l.scenario, &res),
        summary,
        scenario: Some(l.echo),
    })
}

fn cmd_sensitivity(l: Loaded, t0: usize, delta: f64, target: Target) -> Result<RunReport> {
    if l.scenario.specs.len() != 1 {
        bail!("n_stores: sensitivity needs exactly one store");
    }
    let spec = &l.scenario.specs[0];
    let zero = FlowVector::zeros(l.prices.len());
    // a relaxed rate trades beyond the configured range
    let (lo, hi) = l.scenario.flow_range();
    let wide = to_price_functions(
        &l.scenario.series,
        l.scenario.lambda,
        (lo - spec.efficiency * delta.abs(), hi + delta.abs()),
    )?;
    let (rep, name) = match target {
        Target::Capacity => (
            sensitivity_capacity(spec, &l.prices, &zero, t0, delta)?,
            "capacity",
        ),
        Target::RateIn => (
            sensitivity_rate(spec, &wide, &zero, t0, RateSide::In, delta)?,
            "rate_in",
        ),
        Target::RateOut => (
            sensitivity_rate(spec, &wide, &zero, t0, RateSide::Out, delta)?,
            "rate_out",
        ),
    };
    let (res, _, _) = single(&l, Mode::Nash)?;
    let mut periods = rows(&l.scenario, &res);
    for (r, d) in periods.iter_mut().zip(&rep.flow_deltas) {
        r.flow_delta = Some(*d);
    }
    let summary = Summary {
        ok: true,
        sensitivity_target: Some(name.into()),
        t0: Some(rep.t0),
        delta: Some(rep.delta),
        changed_before: rep.changed_interval_before,
        changed_after: rep.changed_interval_after,
        objective_delta: Some(rep.objective_delta),
        base_binding: Some(rep.base_binding),
        profits: res.profits.clone(),
        total_profit: Some(res.total_profit()),
        ..Summary::default()
    };
    Ok(RunReport {
        command: "sensitivity".into(),
        periods,
        summary,
        scenario: Some(l.echo),
    })
}

fn cmd_clearing2p(
    r1: (f64, f64),
    r2: (f64, f64),
    bid: &str,
    range: (f64, f64),
) -> Result<RunReport> {
    let bid = if bid.trim() == "zero" {
        SupplyBid::Zero
    } else {
        let (intercept, slope) = pair(bid).map_err(|e| anyhow!("--bid: {e}"))?;
        SupplyBid::Linear {
            intercept,
            slope,
            floor_at_zero: false,
        }
    };
    let c = clear_two_period(
        &ResidualSupply::linear(r1.0, r1.1, range)?,
        &ResidualSupply::linear(r2.0, r2.1, range)?,
        &bid,
    )?;
    Ok(RunReport {
        command: "clearing2p".into(),
        scenario: None,
        periods: vec![],
        summary: Summary {
            ok: true,
            p1: Some(c.p1),
            p2: Some(c.p2),
            pdiff: Some(c.pdiff),
            q: Some(c.q),
            ..Summary::default()
        },
    })
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let report = match &cli.cmd {
        Cmd::Optimize { cfg, lambda_max } => {
            cmd_optimize(load(cfg, cli.seed)?, cli.tol, *lambda_max)?
        }
        Cmd::Nash { cfg } => cmd_nash(load(cfg, cli.seed)?, cli.tol)?,
        Cmd::Coop { cfg } => cmd_coop(load(cfg, cli.seed)?, cli.tol)?,
        Cmd::Surplus { cfg } => cmd_surplus(load(cfg, cli.seed)?, cli.tol)?,
        Cmd::Sensitivity {
            cfg,
            t0,
            delta,
            target,
        } => cmd_sensitivity(load(cfg, cli.seed)?, *t0, *delta, *target)?,
        Cmd::Clearing2p {
            r1,
            r2,
            bid,
            price_range,
        } => cmd_clearing2p(*r1, *r2, bid, *price_range)?,
        Cmd::Synth {
            days,
            day_amp,
            week_amp,
            season_amp,
            base,
            noise_sd,
        } => {
            let params = SynthParams {
                day_amp: *day_amp,
                week_amp: *week_amp,
                season_amp: *season_amp,
                base: *base,
                noise_sd: *noise_sd,
            };
            let s = synth_prices(cli.seed.unwrap_or(0), *days, params)?;
            emit(cli, &format_price_csv(&s))?;
            return Ok(true);
        }
    };
    emit(cli, &report.render(cli.format)?)?;
    if !report.summary.ok {
        eprintln!("pricemaker: residual or convergence check failed");
    }
    Ok(report.summary.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("pricemaker: {e:#}");
            ExitCode::FAILURE
        }
    }
}
