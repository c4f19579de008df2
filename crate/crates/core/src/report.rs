//! Run reports: a scenario echo, a tidy per-period table and a summary.

use std::fmt::Write as _;

use serde::Serialize;

use pricemaker::store::StoreSpec;
use pricemaker::welfare::DemandModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioEcho {
    pub lambda: f64,
    pub horizon: usize,
    pub price_source: String,
    pub seed: Option<u64>,
    pub stores: Vec<StoreSpec>,
    pub demand: Option<DemandModel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodRow {
    pub t: usize,
    pub timestamp: String,
    pub pbar: f64,
    pub clearing_price: f64,
    pub levels: Vec<f64>,
    pub flows: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow_delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub profits: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_profit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub br_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonunique: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binding: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surplus_delta_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surplus_delta_approx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_error_half: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_error_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity_target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changed_before: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changed_after: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_binding: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pdiff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioEcho>,
    pub periods: Vec<PeriodRow>,
    pub summary: Summary,
}

impl RunReport {
    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        Ok(match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self)?;
                s.push('\n');
                s
            }
            Format::Csv => self.to_csv()?,
        })
    }

    /// Summary as `# key=json` comment lines, then the period table.
    fn to_csv(&self) -> anyhow::Result<String> {
        let mut out = String::new();
        writeln!(out, "# command={}", self.command)?;
        if let serde_json::Value::Object(m) = serde_json::to_value(&self.summary)? {
            for (k, v) in m {
                writeln!(out, "# {k}={v}")?;
            }
        }
        let Some(first) = self.periods.first() else {
            return Ok(out);
        };
        let n = first.levels.len();
        let mut header = String::from("t,timestamp,pbar,clearing_price");
        for i in 1..=n {
            write!(header, ",level_{i}")?;
        }
        for i in 1..=n {
            write!(header, ",flow_{i}")?;
        }
        if first.flow_delta.is_some() {
            header.push_str(",flow_delta");
        }
        writeln!(out, "{header}")?;
        for r in &self.periods {
            write!(
                out,
                "{},{},{},{}",
                r.t, r.timestamp, r.pbar, r.clearing_price
            )?;
            for v in r.levels.iter().chain(&r.flows) {
                write!(out, ",{v}")?;
            }
            if let Some(d) = r.flow_delta {
                write!(out, ",{d}")?;
            }
            out.push('\n');
        }
        Ok(out)
    }
}
