//! Run reports: per-run rows, aggregate statistics and a config echo.

use std::fmt::Write as _;

use serde::Serialize;
use splitcount::caprecap::{relative_error, CapRecapResult};

use crate::args::Estimator;
use crate::trace::TraceRow;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub model: String,
    pub instance: String,
    pub description: String,
    pub samples: u64,
    pub rho: f64,
    pub runs: u64,
    pub seed: u64,
    pub estimator: Estimator,
    pub max_iterations: u64,
    pub chain_thinning: u64,
    pub boost_samples: Option<u64>,
    pub boost_trigger: Option<i64>,
    pub cap_n1: u64,
    pub cap_n2: u64,
    pub cap_chain_sweeps: u64,
    pub cap_chain_length: u64,
    pub ecap_window: (f64, f64),
    pub ecap_max_aux: usize,
    pub ecap_samples: usize,
    pub ecap_regime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcapSummary {
    pub tau: usize,
    pub c_hat_aux: f64,
    pub aux_clauses: Vec<Vec<i32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub run: u64,
    pub seed: u64,
    pub iterations: usize,
    /// Final estimate from the selected estimator; absent when it failed.
    pub estimate: Option<f64>,
    /// Product estimate of the splitting run itself.
    pub split_estimate: Option<f64>,
    /// Estimator that produced `estimate` (ecap may fall back to caprecap).
    pub estimator: Option<Estimator>,
    pub caprecap: Option<CapRecapResult>,
    pub ecap: Option<EcapSummary>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub successful_runs: usize,
    pub mean_estimate: Option<f64>,
    pub relative_error: Option<f64>,
    pub mean_iterations: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_count: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_deviation_of_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub runs: Vec<RunRow>,
    pub aggregate: Aggregate,
    pub traces: Vec<Vec<TraceRow>>,
}

impl Aggregate {
    /// Mean and relative error over the successful runs.
    pub fn from_rows(rows: &[RunRow], exact: Option<(String, f64)>) -> Self {
        let est: Vec<f64> = rows.iter().filter_map(|r| r.estimate).collect();
        let mean = (!est.is_empty()).then(|| est.iter().sum::<f64>() / est.len() as f64);
        let iters = rows.iter().map(|r| r.iterations as f64).sum::<f64>() / rows.len().max(1) as f64;
        let (exact_count, rel_deviation_of_mean) = match (exact, mean) {
            (Some((s, x)), Some(m)) => (Some(s), Some((m - x) / x)),
            (Some((s, _)), None) => (Some(s), None),
            (None, _) => (None, None),
        };
        Self {
            successful_runs: est.len(),
            mean_estimate: mean,
            relative_error: relative_error(&est).ok(),
            mean_iterations: iters,
            exact_count,
            rel_deviation_of_mean,
        }
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-run rows as CSV, full precision.
    pub fn rows_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.14e}")).unwrap_or_default();
        let mut out = String::from("run,seed,iterations,estimate,split_estimate,estimator,wall_seconds,abs_deviation,rel_deviation,error\n");
        for r in &self.runs {
            let est = r.estimator.map(|e| format!("{e:?}").to_lowercase()).unwrap_or_default();
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.run,
                r.seed,
                r.iterations,
                opt(r.estimate),
                opt(r.split_estimate),
                est,
                opt(r.wall_seconds),
                opt(r.abs_deviation),
                opt(r.rel_deviation),
                err
            )
            .unwrap();
        }
        out
    }

    /// Table in the style of the published result tables.
    pub fn to_human(&self, timing: bool) -> String {
        let c = &self.config;
        let mut out = String::new();
        writeln!(out, "{} ({})", c.description, c.instance).unwrap();
        writeln!(
            out,
            "N = {}, rho = {}, runs = {}, seed = {}, estimator = {:?}",
            c.samples, c.rho, c.runs, c.seed, c.estimator
        )
        .unwrap();
        let deviations = self.runs.iter().any(|r| r.rel_deviation.is_some());
        let mut header = format!("{:>5} {:>6} {:>10}", "run", "its", "estimate");
        if timing {
            write!(header, " {:>9}", "CPU").unwrap();
        }
        if deviations {
            write!(header, " {:>10} {:>10}", "abs dev", "rel dev").unwrap();
        }
        writeln!(out, "{header}").unwrap();
        for r in &self.runs {
            let est = r.estimate.map(sci3).unwrap_or_else(|| "failed".into());
            let mut line = format!("{:>5} {:>6} {:>10}", r.run, r.iterations, est);
            if timing {
                write!(line, " {:>9.3}", r.wall_seconds.unwrap_or(0.0)).unwrap();
            }
            if deviations {
                let f = |x: Option<f64>| x.map(sci3).unwrap_or_default();
                write!(line, " {:>10} {:>10}", f(r.abs_deviation), f(r.rel_deviation)).unwrap();
            }
            if let Some(e) = &r.error {
                write!(line, "  ({e})").unwrap();
            }
            writeln!(out, "{line}").unwrap();
        }
        let a = &self.aggregate;
        let mean = a.mean_estimate.map(sci3).unwrap_or_else(|| "-".into());
        writeln!(out, "{:>5} {:>6.1} {:>10}", "mean", a.mean_iterations, mean).unwrap();
        if let Some(re) = a.relative_error {
            writeln!(out, "RE = {}", sci3(re)).unwrap();
        }
        if let Some(x) = &a.exact_count {
            let dev = a.rel_deviation_of_mean.map(sci3).unwrap_or_else(|| "-".into());
            writeln!(out, "exact = {x}, relative deviation of mean = {dev}").unwrap();
        }
        out
    }
}

/// Scientific notation with three significant digits, e.g. `7.31E+03`.
pub fn sci3(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.2E}");
    let (mant, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}E{sign}{:02}", exp.abs())
}
