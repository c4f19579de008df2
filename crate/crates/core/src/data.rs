//! Price series ingestion, synthetic series and scenario configuration.
//!
//! CSV layout: header `timestamp,price_gbp_per_mwh`, one half-hour per row,
//! timestamps as `YYYY-MM-DDTHH:MM`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{clearing_prices, validate_price_function, PriceFunction};
use crate::store::{Schedule, StoreSpec};
use crate::welfare::DemandModel;

pub const CSV_HEADER: &str = "timestamp,price_gbp_per_mwh";
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";
pub const PERIODS_PER_DAY: usize = 48;

fn period() -> Duration {
    Duration::minutes(30)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub pbar: Vec<f64>,
}

impl PriceSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, pbar: Vec<f64>) -> Result<Self> {
        let s = Self { timestamps, pbar };
        s.validate()?;
        Ok(s)
    }

    /// Consecutive half-hours starting at `start`.
    pub fn from_prices(start: NaiveDateTime, pbar: Vec<f64>) -> Result<Self> {
        let timestamps = (0..pbar.len())
            .map(|i| start + period() * i as i32)
            .collect();
        Self::new(timestamps, pbar)
    }

    pub fn len(&self) -> usize {
        self.pbar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pbar.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.timestamps.len() != self.pbar.len() {
            return Err(Error::InvalidArgument(
                "timestamp/price length mismatch".into(),
            ));
        }
        for w in self.timestamps.windows(2) {
            let step = w[1] - w[0];
            if step > period() {
                return Err(Error::Gap(w[0].format(TIMESTAMP_FORMAT).to_string()));
            }
            if step != period() {
                return Err(Error::InvalidArgument(format!(
                    "timestamps must advance by 30 minutes (at {})",
                    w[1].format(TIMESTAMP_FORMAT)
                )));
            }
        }
        if let Some(i) = self.pbar.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "price {} at {} is not positive",
                self.pbar[i],
                self.timestamps[i].format(TIMESTAMP_FORMAT)
            )));
        }
        Ok(())
    }
}

pub fn parse_price_csv(text: &str) -> Result<PriceSeries> {
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut timestamps = Vec::new();
    let mut pbar = Vec::new();
    let mut last_line = 1;
    for (i, raw) in lines {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            last_line = line;
            continue;
        }
        if last_line != line - 1 && !timestamps.is_empty() {
            return Err(Error::Parse {
                line: line - 1,
                msg: "blank line inside data".into(),
            });
        }
        last_line = line;
        let (ts, p) = raw.split_once(',').ok_or_else(|| Error::Parse {
            line,
            msg: "expected two fields".into(),
        })?;
        let ts = NaiveDateTime::parse_from_str(ts, TIMESTAMP_FORMAT).map_err(|e| Error::Parse {
            line,
            msg: format!("bad timestamp `{ts}`: {e}"),
        })?;
        let p: f64 = p.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad price `{p}`"),
        })?;
        timestamps.push(ts);
        pbar.push(p);
    }
    if pbar.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    PriceSeries::new(timestamps, pbar)
}

pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    parse_price_csv(&fs::read_to_string(path)?)
}

pub fn format_price_csv(series: &PriceSeries) -> String {
    let mut out = String::with_capacity(32 * (series.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (t, p) in series.timestamps.iter().zip(&series.pbar) {
        out.push_str(&format!("{},{}\n", t.format(TIMESTAMP_FORMAT), p));
    }
    out
}

pub fn save_price_csv(series: &PriceSeries, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_price_csv(series))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub day_amp: f64,
    pub week_amp: f64,
    pub season_amp: f64,
    pub base: f64,
    pub noise_sd: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            day_amp: 15.0,
            week_amp: 5.0,
            season_amp: 5.0,
            base: 45.0,
            noise_sd: 2.0,
        }
    }
}

pub fn synth_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2014, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Synthetic half-hourly prices starting 2014-01-01 00:00:
///
/// `base - day_amp cos(2 pi i / 48) - week_amp [weekend] + season_amp cos(2 pi day / 365) + noise`
///
/// floored at `base / 10`. Cheap at night, dearer by day, lower at weekends
/// and in summer. Noise is `noise_sd * z` with `z` from the Box-Muller
/// transform `sqrt(-2 ln(1 - u1)) cos(2 pi u2)` of two uniforms drawn from
/// ChaCha8 seeded with `seed` (one pair per period).
pub fn synth_prices(seed: u64, days: usize, params: SynthParams) -> Result<PriceSeries> {
    let SynthParams {
        day_amp,
        week_amp,
        season_amp,
        base,
        noise_sd,
    } = params;
    if [day_amp, week_amp, season_amp, noise_sd]
        .iter()
        .any(|a| !(*a >= 0.0))
    {
        return Err(Error::InvalidArgument(
            "amplitudes must be nonnegative".into(),
        ));
    }
    if !(base > day_amp + week_amp + season_amp + 5.0 * noise_sd) {
        return Err(Error::Precondition(
            "base must exceed the sum of amplitudes plus five noise deviations".into(),
        ));
    }
    if days == 0 {
        return Err(Error::InvalidArgument("days must be positive".into()));
    }
    let tau = std::f64::consts::TAU;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = synth_start();
    let pbar = (0..days * PERIODS_PER_DAY)
        .map(|i| {
            let day = i / PERIODS_PER_DAY;
            // 2014-01-01 is a Wednesday
            let weekend = matches!((day + 2) % 7, 5 | 6);
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (tau * u2).cos();
            let p = base
                - day_amp * (tau * (i % PERIODS_PER_DAY) as f64 / PERIODS_PER_DAY as f64).cos()
                - if weekend { week_amp } else { 0.0 }
                + season_amp * (tau * day as f64 / 365.0).cos()
                + noise_sd * z;
            p.max(base / 10.0)
        })
        .collect();
    PriceSeries::from_prices(start, pbar)
}

/// `p_t(x) = pbar_t (1 + lambda x)` for each period, valid on `flow_range`.
pub fn to_price_functions(
    series: &PriceSeries,
    lambda: f64,
    flow_range: (f64, f64),
) -> Result<Vec<PriceFunction>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
    }
    series
        .pbar
        .iter()
        .map(|&p| {
            let pf = PriceFunction::linear(p, lambda * p, flow_range)?;
            let report = validate_price_function(&pf, (0.0, 0.0), 3)?;
            if !report.passed() {
                return Err(Error::Precondition(format!(
                    "price function with pbar {p} and lambda {lambda} fails on [{}, {}]: {:?}",
                    flow_range.0, flow_range.1, report.violations[0]
                )));
            }
            Ok(pf)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub series: PriceSeries,
    pub lambda: f64,
    pub specs: Vec<StoreSpec>,
    pub demand: Option<Vec<DemandModel>>,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.series.len()
    }

    /// Aggregate market-side range the stores can trade, `[-sum eps P_O, sum P_I]`.
    pub fn flow_range(&self) -> (f64, f64) {
        let lo: f64 = self.specs.iter().map(|s| s.efficiency * s.rate_out).sum();
        let hi: f64 = self.specs.iter().map(|s| s.rate_in).sum();
        (-lo, hi)
    }

    pub fn price_functions(&self) -> Result<Vec<PriceFunction>> {
        to_price_functions(&self.series, self.lambda, self.flow_range())
    }

    pub fn clearing_prices(&self, schedules: &[Schedule]) -> Result<Vec<f64>> {
        clearing_prices(&self.price_functions()?, &self.specs, schedules)
    }
}

/// Scenario file: flat `key = value` lines (TOML syntax).
///
/// Store keys describe each store, or the fleet total when `split = true`
/// (every energy quantity divided by `n_stores`). Prices come from
/// `price_csv` or from the synthetic keys (`seed`, `days`, `day_amp`,
/// `week_amp`, `season_amp`, `base`, `noise_sd`). Optional demand: either
/// `demand` (inelastic quantity) or `demand_a` and `demand_b` (linear
/// `a - b p`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lambda: f64,
    pub efficiency: f64,
    pub capacity: f64,
    pub rate_in: f64,
    pub rate_out: f64,
    #[serde(default)]
    pub level_start: f64,
    #[serde(default)]
    pub level_end: f64,
    #[serde(default = "one")]
    pub n_stores: usize,
    #[serde(default)]
    pub split: bool,
    pub price_csv: Option<PathBuf>,
    pub seed: Option<u64>,
    pub days: Option<usize>,
    pub day_amp: Option<f64>,
    pub week_amp: Option<f64>,
    pub season_amp: Option<f64>,
    pub base: Option<f64>,
    pub noise_sd: Option<f64>,
    pub demand: Option<f64>,
    pub demand_a: Option<f64>,
    pub demand_b: Option<f64>,
}

fn one() -> usize {
    1
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&fs::read_to_string(path)?)?;
        // relative CSV paths are taken from the config's directory
        if let (Some(csv), Some(dir)) = (&cfg.price_csv, path.parent()) {
            if csv.is_relative() {
                cfg.price_csv = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn synth_params(&self) -> SynthParams {
        let d = SynthParams::default();
        SynthParams {
            day_amp: self.day_amp.unwrap_or(d.day_amp),
            week_amp: self.week_amp.unwrap_or(d.week_amp),
            season_amp: self.season_amp.unwrap_or(d.season_amp),
            base: self.base.unwrap_or(d.base),
            noise_sd: self.noise_sd.unwrap_or(d.noise_sd),
        }
    }

    fn has_synth_keys(&self) -> bool {
        self.seed.is_some()
            || self.days.is_some()
            || self.day_amp.is_some()
            || self.week_amp.is_some()
            || self.season_amp.is_some()
            || self.base.is_some()
            || self.noise_sd.is_some()
    }

    pub fn store_specs(&self) -> Result<Vec<StoreSpec>> {
        if self.n_stores == 0 {
            return Err(Error::Config("n_stores: must be at least 1".into()));
        }
        let spec = StoreSpec::new(
            self.capacity,
            self.rate_in,
            self.rate_out,
            self.efficiency,
            self.level_start,
            self.level_end,
        )
        .map_err(|e| Error::Config(format!("store: {e}")))?;
        let spec = if self.split {
            spec.scaled(1.0 / self.n_stores as f64)?
        } else {
            spec
        };
        Ok(vec![spec; self.n_stores])
    }

    /// Builds the scenario. `seed` overrides the configured seed.
    pub fn build(&self, seed: Option<u64>) -> Result<Scenario> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda: must be nonnegative".into()));
        }
        let series = match &self.price_csv {
            Some(p) if self.has_synth_keys() => {
                return Err(Error::Config(format!(
                    "price_csv ({}) conflicts with synthetic keys",
                    p.display()
                )))
            }
            Some(p) => load_price_csv(p)?,
            None => {
                let days = self
                    .days
                    .ok_or_else(|| Error::Config("days: required without price_csv".into()))?;
                let seed = seed.or(self.seed).unwrap_or(0);
                synth_prices(seed, days, self.synth_params())?
            }
        };
        let demand = match (self.demand, self.demand_a, self.demand_b) {
            (None, None, None) => None,
            (Some(d), None, None) => Some(DemandModel::Inelastic(d)),
            (None, Some(a), Some(b)) => Some(DemandModel::Linear { a, b }),
            _ => {
                return Err(Error::Config(
                    "demand: give either `demand` or both `demand_a` and `demand_b`".into(),
                ))
            }
        };
        if let Some(d) = &demand {
            d.validate()
                .map_err(|e| Error::Config(format!("demand: {e}")))?;
        }
        let t = series.len();
        let sc = Scenario {
            series,
            lambda: self.lambda,
            specs: self.store_specs()?,
            demand: demand.map(|d| vec![d; t]),
        };
        sc.price_functions()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).unwrap()
    }

    #[test]
    fn two_row_file() {
        let s = parse_price_csv(
            "timestamp,price_gbp_per_mwh\n2014-01-01T00:00,41.5\n2014-01-01T00:30,40\n",
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.pbar, vec![41.5, 40.0]);
        // no trailing newline, CRLF
        let s2 = parse_price_csv(
            "timestamp,price_gbp_per_mwh\r\n2014-01-01T00:00,41.5\r\n2014-01-01T00:30,40",
        )
        .unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn gap_names_timestamp() {
        let e = parse_price_csv(
            "timestamp,price_gbp_per_mwh\n2014-01-01T00:00,41.5\n2014-01-01T01:00,40\n",
        )
        .unwrap_err();
        assert_eq!(e, Error::Gap("2014-01-01T00:00".into()));
    }

    #[test]
    fn zero_price_rejected() {
        let e = parse_price_csv("timestamp,price_gbp_per_mwh\n2014-01-01T00:00,0.0\n").unwrap_err();
        assert!(matches!(e, Error::InvalidArgument(_)), "{e:?}");
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = parse_price_csv("timestamp,price_gbp_per_mwh\n2014-01-01T00:00,4x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_price_csv("time,price\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_price_csv("timestamp,price_gbp_per_mwh\n2014-01-01 00:00,4\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn synth_periodic_without_noise() {
        let p = SynthParams {
            day_amp: 10.0,
            week_amp: 0.0,
            season_amp: 0.0,
            base: 40.0,
            noise_sd: 0.0,
        };
        let s = synth_prices(1, 7, p).unwrap();
        assert_eq!(s.len(), 7 * 48);
        for i in 48..s.len() {
            assert_eq!(s.pbar[i], s.pbar[i - 48]);
        }
        assert!(s.pbar[24] > s.pbar[0]);
    }

    #[test]
    fn synth_deterministic_and_constant() {
        let p = SynthParams::default();
        assert_eq!(
            synth_prices(9, 3, p).unwrap(),
            synth_prices(9, 3, p).unwrap()
        );
        assert_ne!(
            synth_prices(9, 3, p).unwrap(),
            synth_prices(10, 3, p).unwrap()
        );
        let flat = SynthParams {
            day_amp: 0.0,
            week_amp: 0.0,
            season_amp: 0.0,
            base: 30.0,
            noise_sd: 0.0,
        };
        assert!(synth_prices(3, 2, flat)
            .unwrap()
            .pbar
            .iter()
            .all(|&x| x == 30.0));
    }

    #[test]
    fn synth_margin_enforced() {
        let p = SynthParams {
            base: 10.0,
            ..SynthParams::default()
        };
        assert!(matches!(synth_prices(0, 1, p), Err(Error::Precondition(_))));
    }

    #[test]
    fn price_function_examples() {
        let s = PriceSeries::from_prices(ts("2014-01-01T00:00"), vec![20.0, 30.0]).unwrap();
        let pf = to_price_functions(&s, 1.0, (-0.8, 0.8)).unwrap();
        assert!((pf[0].eval(-0.5) - 10.0).abs() < 1e-12);
        let flat = to_price_functions(&s, 0.0, (-1.0, 1.0)).unwrap();
        assert_eq!(flat[1].linear_coefficients(), Some((30.0, 0.0)));
        assert!(matches!(
            to_price_functions(&s, 1.0, (-1.5, 1.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn scaling_invariance() {
        let s = PriceSeries::from_prices(ts("2014-01-01T00:00"), vec![20.0, 37.5]).unwrap();
        let (lam, k) = (0.3, 4.0);
        let a = to_price_functions(&s, lam, (-2.0, 2.0)).unwrap();
        let b = to_price_functions(&s, k * lam, (-2.0 / k, 2.0 / k)).unwrap();
        for (fa, fb) in a.iter().zip(&b) {
            for x in [-2.0, -0.7, 0.0, 1.3, 2.0] {
                assert!((fa.eval(x) - fb.eval(x / k)).abs() <= 1e-12 * fa.eval(x).abs());
            }
        }
    }

    #[test]
    fn config_round_trip_and_errors() {
        let cfg = ScenarioConfig::parse(
            "lambda = 0.01\nefficiency = 0.75\ncapacity = 10\nrate_in = 1\nrate_out = 1\n\
             n_stores = 2\nsplit = true\nseed = 4\ndays = 2\ndemand = 100\n",
        )
        .unwrap();
        let sc = cfg.build(None).unwrap();
        assert_eq!(sc.specs.len(), 2);
        assert_eq!(sc.specs[0].capacity, 5.0);
        assert_eq!(sc.horizon(), 96);
        assert_eq!(
            sc.demand.as_ref().unwrap()[0],
            DemandModel::Inelastic(100.0)
        );

        let e = ScenarioConfig::parse("lambda = 0.01\ncapcity = 3\n").unwrap_err();
        assert!(e.to_string().contains("capcity"), "{e}");
        let e = ScenarioConfig::parse("lambda = 0.01\nefficiency = 0.75\n").unwrap_err();
        assert!(e.to_string().contains("capacity"), "{e}");
        let bad = ScenarioConfig {
            efficiency: 1.5,
            ..cfg.clone()
        };
        assert!(bad
            .build(None)
            .unwrap_err()
            .to_string()
            .contains("efficiency"));
    }

    proptest! {
        #[test]
        fn csv_round_trip(prices in prop::collection::vec(0.01f64..1e4, 1..60), off in 0i64..100_000) {
            let start = synth_start() + Duration::minutes(30 * off);
            let s = PriceSeries::from_prices(start, prices).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            save_price_csv(&s, &path).unwrap();
            prop_assert_eq!(load_price_csv(&path).unwrap(), s);
        }

        #[test]
        fn synth_always_valid(seed in any::<u64>(), days in 1usize..4, amp in 0.0f64..20.0, sd in 0.0f64..5.0) {
            let p = SynthParams { day_amp: amp, week_amp: amp / 2.0, season_amp: amp / 2.0, base: 2.0 * amp + 5.0 * sd + 1.0, noise_sd: sd };
            let s = synth_prices(seed, days, p).unwrap();
            prop_assert!(s.validate().is_ok());
            prop_assert!(s.pbar.iter().all(|&x| x >= p.base / 10.0));
        }
    }
}
