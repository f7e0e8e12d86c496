//! Per-iteration trace files.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use splitcount::IterationTrace;

pub const CSV_HEADER: &str = "t,log10_estimate,N_t,N_t_screened,m_upper,m_lower,c_hat";

/// One trace line: `N_t` is the number of elites, `N_t_screened` the
/// number left after removing duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub log10_estimate: f64,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    #[serde(rename = "N_t_screened")]
    pub n_t_screened: usize,
    pub m_upper: i64,
    pub m_lower: i64,
    pub c_hat: f64,
}

impl From<&IterationTrace> for TraceRow {
    fn from(t: &IterationTrace) -> Self {
        Self {
            t: t.t,
            log10_estimate: t.log_estimate / std::f64::consts::LN_10,
            n_t: t.n_elites,
            n_t_screened: t.n_screened,
            m_upper: t.m_upper,
            m_lower: t.m_lower,
            c_hat: t.c_hat,
        }
    }
}

pub fn rows(traces: &[IterationTrace]) -> Vec<TraceRow> {
    traces.iter().map(TraceRow::from).collect()
}

pub fn to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:.14e},{},{},{},{},{:.14e}",
            r.t, r.log10_estimate, r.n_t, r.n_t_screened, r.m_upper, r.m_lower, r.c_hat
        )
        .unwrap();
    }
    out
}

pub fn to_json(rows: &[TraceRow]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("trace rows serialize");
    s.push('\n');
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => bail!("unexpected trace header {other:?}"),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 7 {
                bail!("line {}: expected 7 fields, found {}", i + 2, f.len());
            }
            let ctx = || format!("line {}", i + 2);
            Ok(TraceRow {
                t: f[0].parse().with_context(ctx)?,
                log10_estimate: f[1].parse().with_context(ctx)?,
                n_t: f[2].parse().with_context(ctx)?,
                n_t_screened: f[3].parse().with_context(ctx)?,
                m_upper: f[4].parse().with_context(ctx)?,
                m_lower: f[5].parse().with_context(ctx)?,
                c_hat: f[6].parse().with_context(ctx)?,
            })
        })
        .collect()
}
