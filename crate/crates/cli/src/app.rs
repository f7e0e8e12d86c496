//! Multi-run orchestration behind `splitcount count`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use splitcount::bigcount::BigUint;
use splitcount::caprecap::{
    cap_recap, draw_final_batches, extended_cap_recap, BatchConfig, CapRecapError, CapRecapResult, EcapConfig,
    EcapResult,
};
use splitcount::graph::parse_degrees;
use splitcount::oracle::{self, OracleBudget, OracleError};
use splitcount::table::parse_table_spec;
use splitcount::{parse_dimacs, run_splitting, Boost, CountingModel, DegreeInstance, SplitConfig, TableInstance};

use crate::args::{Cli, Command, CommonArgs, Estimator, Format, ModelCommand};
use crate::report::{Aggregate, ConfigEcho, EcapSummary, RunReport, RunRow};
use crate::trace;

/// Failures, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input or configuration (exit 2).
    Usage(anyhow::Error),
    /// IO and other runtime failures (exit 1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

type EcapFn<'a, S> = &'a (dyn Fn(&[S], &EcapConfig) -> Result<EcapResult, CapRecapError> + Sync);

/// Runs the command, prints the human report to `out` and writes the
/// requested files. The flag is true when every run produced an estimate.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(RunReport, bool), Failure> {
    let Command::Count { model } = &cli.command;
    let (report, opts) = match model {
        ModelCommand::Sat { cnf, opts } => {
            let text = read(cnf)?;
            let inst = parse_dimacs(&text).with_context(|| format!("parsing {}", cnf.display())).map_err(usage)?;
            let exact = exact(opts, || oracle::exact_count_sat(&inst, OracleBudget::default()));
            let ecap = |states: &[_], cfg: &EcapConfig| extended_cap_recap(&inst, states, cfg);
            (count(&inst, "sat", cnf, opts, exact, Some(&ecap))?, opts)
        }
        ModelCommand::Graph { degrees, opts } => {
            let text = read(degrees)?;
            let d = parse_degrees(&text).map_err(usage)?;
            let inst = DegreeInstance::new(d).map_err(usage)?;
            let exact = exact(opts, || oracle::exact_count_graphs(&inst, OracleBudget::default()));
            (count(&inst, "graph", degrees, opts, exact, None)?, opts)
        }
        ModelCommand::Table { spec, branch, opts } => {
            let text = read(spec)?;
            let mut s = parse_table_spec(&text).map_err(usage)?;
            if let Some(b) = branch {
                s.branch = (*b).into();
            }
            let inst = TableInstance::from_spec(&s).map_err(usage)?;
            let exact = exact(opts, || oracle::exact_count_tables(&inst, OracleBudget::default()));
            (count(&inst, "table", spec, opts, exact, None)?, opts)
        }
    };
    out.write_all(report.to_human(opts.timing).as_bytes())
        .context("writing report")
        .map_err(Failure::Runtime)?;
    write_files(&report, opts).map_err(Failure::Runtime)?;
    let ok = report.runs.iter().all(|r| r.error.is_none());
    Ok((report, ok))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)
}

fn exact(opts: &CommonArgs, f: impl FnOnce() -> Result<BigUint, OracleError>) -> Option<(String, f64)> {
    if !opts.oracle {
        return None;
    }
    match f() {
        Ok(v) => {
            let s = v.to_string();
            let x = s.parse().expect("integer string parses as f64");
            Some((s, x))
        }
        Err(e) => {
            log::warn!("skipping oracle comparison: {e}");
            None
        }
    }
}

fn split_config(opts: &CommonArgs) -> SplitConfig {
    let trigger = opts
        .boost_trigger
        .unwrap_or(if opts.estimator == Estimator::Ecap { opts.ecap_trigger } else { 1 });
    SplitConfig {
        sample_size: opts.samples as usize,
        rho: opts.rho,
        seed: opts.seed,
        max_iterations: opts.max_iterations as usize,
        boost: opts.boost_samples.map(|n| Boost { sample_size: n as usize, trigger }),
        chain_thinning: opts.chain_thinning as usize,
        threads: 0,
    }
}

fn batch_config(opts: &CommonArgs, seed: u64) -> BatchConfig {
    BatchConfig {
        n1: opts.cap_n1.unwrap_or(opts.samples) as usize,
        n2: opts.cap_n2.unwrap_or(opts.samples) as usize,
        chain_length: opts.cap_chain_length as usize,
        sweeps: opts.cap_chain_sweeps as usize,
        seed,
    }
}

fn ecap_config(opts: &CommonArgs, seed: u64) -> EcapConfig {
    EcapConfig {
        window: (opts.ecap_window_low, opts.ecap_window_high),
        max_aux: opts.ecap_max_aux,
        base_samples: opts.ecap_samples,
        batches: batch_config(opts, seed),
        ..EcapConfig::default()
    }
}

fn echo<M: CountingModel>(model: &M, kind: &str, path: &Path, opts: &CommonArgs) -> ConfigEcho {
    let cfg = split_config(opts);
    let b = batch_config(opts, opts.seed);
    ConfigEcho {
        model: kind.into(),
        instance: path.display().to_string(),
        description: model.describe(),
        samples: opts.samples,
        rho: opts.rho,
        runs: opts.runs,
        seed: opts.seed,
        estimator: opts.estimator,
        max_iterations: opts.max_iterations,
        chain_thinning: opts.chain_thinning,
        boost_samples: opts.boost_samples,
        boost_trigger: cfg.boost.map(|b| b.trigger),
        cap_n1: b.n1 as u64,
        cap_n2: b.n2 as u64,
        cap_chain_sweeps: opts.cap_chain_sweeps,
        cap_chain_length: opts.cap_chain_length,
        ecap_window: (opts.ecap_window_low, opts.ecap_window_high),
        ecap_max_aux: opts.ecap_max_aux,
        ecap_samples: opts.ecap_samples,
        ecap_regime: opts.ecap_regime,
    }
}

fn validate(opts: &CommonArgs, has_ecap: bool) -> Result<(), Failure> {
    split_config(opts).validate().map_err(usage)?;
    if opts.estimator == Estimator::Ecap {
        if !has_ecap {
            return Err(usage(anyhow!("the ecap estimator is only available for SAT instances")));
        }
        let (lo, hi) = (opts.ecap_window_low, opts.ecap_window_high);
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(usage(anyhow!("ecap window [{lo}, {hi}] must satisfy 0 < low <= high <= 1")));
        }
    }
    if opts.cap_n1 == Some(0) || opts.cap_n2 == Some(0) {
        return Err(usage(anyhow!("capture batch sizes must be positive")));
    }
    Ok(())
}

fn count<M: CountingModel>(
    model: &M,
    kind: &str,
    path: &Path,
    opts: &CommonArgs,
    exact: Option<(String, f64)>,
    ecap: Option<EcapFn<'_, M::State>>,
) -> Result<RunReport, Failure> {
    validate(opts, ecap.is_some())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .context("building thread pool")
        .map_err(Failure::Runtime)?;
    let exact_value = exact.as_ref().map(|e| e.1);
    let (runs, traces): (Vec<RunRow>, Vec<_>) = pool.install(|| {
        (0..opts.runs)
            .map(|k| {
                let (mut row, tr) = one_run(model, opts, opts.seed + k, ecap);
                row.run = k + 1;
                if let (Some(x), Some(e)) = (exact_value, row.estimate) {
                    row.abs_deviation = Some((e - x).abs());
                    row.rel_deviation = Some((e - x) / x);
                }
                (row, tr)
            })
            .unzip()
    });
    let aggregate = Aggregate::from_rows(&runs, exact);
    Ok(RunReport { config: echo(model, kind, path, opts), runs, aggregate, traces })
}

fn one_run<M: CountingModel>(
    model: &M,
    opts: &CommonArgs,
    seed: u64,
    ecap: Option<EcapFn<'_, M::State>>,
) -> (RunRow, Vec<trace::TraceRow>) {
    let start = Instant::now();
    let mut row = RunRow {
        run: 0,
        seed,
        iterations: 0,
        estimate: None,
        split_estimate: None,
        estimator: None,
        caprecap: None,
        ecap: None,
        error: None,
        wall_seconds: None,
        abs_deviation: None,
        rel_deviation: None,
    };
    let cfg = SplitConfig { seed, ..split_config(opts) };
    let result = run_splitting(model, &cfg);
    let traces = match &result {
        Ok(r) => trace::rows(&r.traces),
        Err(e) => trace::rows(e.traces()),
    };
    row.iterations = traces.len();
    match result {
        Err(e) => {
            log::warn!("run with seed {seed} failed: {e}");
            row.error = Some(e.to_string());
        }
        Ok(run) => {
            let split = run.estimate();
            row.split_estimate = Some(split);
            let classic = |row: &mut RunRow| {
                row.estimator = Some(Estimator::Caprecap);
                let batches = draw_final_batches(model, &run.final_states, &batch_config(opts, seed))
                    .and_then(|(b1, b2)| cap_recap(model, &b1, &b2));
                record_caprecap(row, batches);
            };
            match opts.estimator {
                Estimator::Split => {
                    row.estimator = Some(Estimator::Split);
                    row.estimate = Some(split);
                }
                Estimator::Caprecap => classic(&mut row),
                Estimator::Ecap if split < opts.ecap_regime => {
                    log::info!("product estimate {split:.3e} below the ecap regime; using classic capture-recapture");
                    classic(&mut row);
                }
                Estimator::Ecap => {
                    row.estimator = Some(Estimator::Ecap);
                    let f = ecap.expect("validated: ecap is available");
                    match f(&run.final_states, &ecap_config(opts, seed)) {
                        Ok(e) => {
                            row.estimate = Some(e.estimate());
                            row.caprecap = Some(e.inner.clone());
                            row.ecap = Some(EcapSummary { tau: e.tau, c_hat_aux: e.c_hat_aux, aux_clauses: e.aux_clauses });
                        }
                        Err(e) => record_caprecap(&mut row, Err(e)),
                    }
                }
            }
        }
    }
    if opts.timing {
        row.wall_seconds = Some(start.elapsed().as_secs_f64());
    }
    (row, traces)
}

fn record_caprecap(row: &mut RunRow, r: Result<CapRecapResult, CapRecapError>) {
    match r {
        Ok(c) => {
            row.estimate = Some(c.chapman_estimate);
            row.caprecap = Some(c);
        }
        Err(e) => {
            if let CapRecapError::ZeroOverlap(c) = &e {
                row.caprecap = Some(c.clone());
            }
            log::warn!("capture-recapture failed: {e}");
            row.error = Some(e.to_string());
        }
    }
}

/// `trace.csv` becomes `trace-run3.csv` for run 3.
pub fn run_path(path: &Path, run: u64) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-run{run}.{}", ext.to_string_lossy()),
        None => format!("{stem}-run{run}"),
    };
    path.with_file_name(name)
}

fn write_files(report: &RunReport, opts: &CommonArgs) -> Result<()> {
    if let Some(path) = &opts.trace {
        for (k, rows) in report.traces.iter().enumerate() {
            let target = if report.traces.len() == 1 { path.clone() } else { run_path(path, k as u64 + 1) };
            let text = match opts.format {
                Format::Csv => trace::to_csv(rows),
                Format::Json => trace::to_json(rows),
            };
            std::fs::write(&target, text).with_context(|| format!("writing {}", target.display()))?;
        }
    }
    if let Some(path) = &opts.report {
        let text = match opts.format {
            Format::Csv => report.rows_csv(),
            Format::Json => report.to_json(),
        };
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
