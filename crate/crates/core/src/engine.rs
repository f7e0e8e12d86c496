//! Adaptive multilevel splitting for counting.
//!
//! Each iteration picks the next level from the order statistics of the
//! current scores, keeps the elites at or above it, drops duplicate elites,
//! and grows a Gibbs chain from every survivor until the population is back
//! to `N`. The count estimate is `|X_0| * prod(N_t / N)`, carried in log
//! space.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::CountingModel;
use crate::rng::{stream, Purpose};

/// Enlarged population used once the level gets close to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Boost {
    pub sample_size: usize,
    /// Switch once `target - level <= trigger`.
    pub trigger: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitConfig {
    pub sample_size: usize,
    pub rho: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub boost: Option<Boost>,
    /// Gibbs sweeps between consecutive recorded chain states.
    pub chain_thinning: usize,
    /// Worker threads; 0 uses the global rayon pool. Never affects results.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            sample_size: 10_000,
            rho: 0.1,
            seed: 0,
            max_iterations: 1_000,
            boost: None,
            chain_thinning: 1,
            threads: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), SplitError> {
        let bad = |msg: String| Err(SplitError::InvalidConfig(msg));
        if self.sample_size < 100 {
            return bad(format!("sample size {} is below 100", self.sample_size));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho {} is outside (0, 1)", self.rho));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if self.chain_thinning == 0 {
            return bad("chain_thinning must be positive".into());
        }
        if let Some(b) = self.boost {
            if b.sample_size < self.sample_size {
                return bad(format!(
                    "boost sample size {} is below the base sample size {}",
                    b.sample_size, self.sample_size
                ));
            }
            if b.trigger < 0 {
                return bad("boost trigger must be nonnegative".into());
            }
        }
        Ok(())
    }
}

/// One row of the level dynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub t: usize,
    /// Best score in the population that produced this level.
    pub m_upper: i64,
    /// The level itself.
    pub m_lower: i64,
    pub sample_size: usize,
    pub n_elites: usize,
    pub n_screened: usize,
    pub c_hat: f64,
    /// `ln(|X_0| * prod_{i<=t} c_hat_i)`.
    pub log_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult<S> {
    pub log_estimate: f64,
    pub iterations: usize,
    pub traces: Vec<IterationTrace>,
    /// Distinct solutions among the final elites.
    pub final_states: Vec<S>,
    /// Total number of states drawn or recorded over the run.
    pub sampled_states: usize,
    pub wall_time: f64,
}

impl<S> RunResult<S> {
    pub fn estimate(&self) -> f64 {
        self.log_estimate.exp()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no admissible level after {} iterations (iteration limit {limit})", traces.len())]
    IterationLimitExceeded { limit: usize, traces: Vec<IterationTrace> },
    #[error("stagnation at iteration {t}: no sample scores above level {level}")]
    StagnationFailure { t: usize, level: i64, traces: Vec<IterationTrace> },
}

impl SplitError {
    /// Level dynamics recorded before the failure.
    pub fn traces(&self) -> &[IterationTrace] {
        match self {
            SplitError::InvalidConfig(_) => &[],
            SplitError::IterationLimitExceeded { traces, .. }
            | SplitError::StagnationFailure { traces, .. } => traces,
        }
    }
}

/// No score exceeds the previous level.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("no score exceeds level {previous}")]
pub struct Stagnation {
    pub previous: i64,
}

/// Picks the next level: the `ceil(N * rho)`-th largest score, clamped to
/// `target`. When that does not exceed `previous`, the smallest sample score
/// above `previous` is used instead.
pub fn select_threshold(scores: &[i64], previous: i64, rho: f64, target: i64) -> Result<i64, Stagnation> {
    assert!(!scores.is_empty(), "cannot select a level from an empty population");
    assert!(previous < target, "previous level already at target");
    let n = scores.len();
    // the epsilon keeps e.g. 0.1 * 30 from rounding up to 4
    let k = ((n as f64 * rho - 1e-9).ceil() as usize).clamp(1, n);
    let mut sorted = scores.to_vec();
    let (_, &mut q, _) = sorted.select_nth_unstable_by(k - 1, |a, b| b.cmp(a));
    let q = q.min(target);
    if q > previous {
        return Ok(q);
    }
    // previous + 1 may be unattainable (graph and table scores are even)
    scores
        .iter()
        .copied()
        .filter(|&s| s > previous)
        .min()
        .ok_or(Stagnation { previous })
}

/// Samples scoring at least `threshold`, in input order.
pub fn extract_elites<S: Clone>(samples: &[S], scores: &[i64], threshold: i64) -> Vec<S> {
    assert_eq!(samples.len(), scores.len());
    samples
        .iter()
        .zip(scores)
        .filter(|(_, &s)| s >= threshold)
        .map(|(x, _)| x.clone())
        .collect()
}

/// Drops duplicates by canonical key, keeping first occurrences in order.
pub fn screen<M: CountingModel>(model: &M, elites: Vec<M::State>) -> Vec<M::State> {
    let keys: Vec<Vec<u8>> = elites.par_iter().map(|s| model.canonical_key(s)).collect();
    let mut seen = HashSet::with_capacity(keys.len());
    elites
        .into_iter()
        .zip(keys)
        .filter_map(|(s, k)| seen.insert(k).then_some(s))
        .collect()
}

/// Grows one chain per screened elite until there are exactly `n` states.
///
/// With `b = floor(n / n_s)`, every chain records its seed plus `b - 1`
/// further states; `n - n_s * b` chains, chosen uniformly without
/// replacement, record one extra state. Chains are laid out in seed order.
/// Randomness comes from the `(seed, level)` stream family, so the result
/// does not depend on the thread count.
pub fn repopulate<M: CountingModel>(
    model: &M,
    screened: &[M::State],
    threshold: i64,
    n: usize,
    thinning: usize,
    seed: u64,
    level: u64,
) -> Vec<M::State> {
    let n_s = screened.len();
    assert!(n_s > 0, "repopulate needs at least one seed state");
    assert!(n_s <= n, "more seeds than target population");
    let b = n / n_s;
    let extra = n - n_s * b;
    let mut extended = vec![false; n_s];
    if extra > 0 {
        let mut rng = stream(seed, Purpose::Extension, level, 0);
        for i in index::sample(&mut rng, n_s, extra) {
            extended[i] = true;
        }
    }
    let chains: Vec<Vec<M::State>> = screened
        .par_iter()
        .zip(extended.par_iter())
        .enumerate()
        .map(|(i, (start, &ext))| {
            let len = b + ext as usize;
            let mut rng = stream(seed, Purpose::Chain, level, i as u64);
            let mut out = Vec::with_capacity(len);
            let mut cur = start.clone();
            out.push(cur.clone());
            for _ in 1..len {
                for _ in 0..thinning {
                    model.gibbs_sweep(&mut cur, threshold, &mut rng);
                }
                debug_assert!(model.score(&cur) >= threshold);
                out.push(cur.clone());
            }
            out
        })
        .collect();
    chains.into_iter().flatten().collect()
}

/// Runs the adaptive splitting algorithm to the target score.
pub fn run_splitting<M: CountingModel>(model: &M, cfg: &SplitConfig) -> Result<RunResult<M::State>, SplitError> {
    cfg.validate()?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| SplitError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| split_loop(model, cfg))
    } else {
        split_loop(model, cfg)
    }
}

fn split_loop<M: CountingModel>(model: &M, cfg: &SplitConfig) -> Result<RunResult<M::State>, SplitError> {
    let start = Instant::now();
    let target = model.target_score();
    let mut n = cfg.sample_size;
    let mut samples: Vec<M::State> = (0..n)
        .into_par_iter()
        .map(|i| model.sample_uniform(&mut stream(cfg.seed, Purpose::InitialSample, 0, i as u64)))
        .collect();
    let mut sampled_states = n;
    let mut previous = model.min_score() - 1;
    let mut log_estimate = model.log_space_size();
    let mut traces: Vec<IterationTrace> = Vec::new();

    for t in 1..=cfg.max_iterations {
        let scores: Vec<i64> = samples.iter().map(|s| model.score(s)).collect();
        let m_upper = *scores.iter().max().expect("population is nonempty");
        let level = select_threshold(&scores, previous, cfg.rho, target).map_err(|e| {
            SplitError::StagnationFailure { t, level: e.previous, traces: traces.clone() }
        })?;
        let elites = extract_elites(&samples, &scores, level);
        let c_hat = elites.len() as f64 / n as f64;
        log_estimate += c_hat.ln();
        let screened = screen(model, elites.clone());
        traces.push(IterationTrace {
            t,
            m_upper,
            m_lower: level,
            sample_size: n,
            n_elites: elites.len(),
            n_screened: screened.len(),
            c_hat,
            log_estimate,
        });
        log::debug!(
            "t={t} level={level} upper={m_upper} elites={} screened={} c_hat={c_hat:.4}",
            elites.len(),
            screened.len()
        );
        if level == target {
            return Ok(RunResult {
                log_estimate,
                iterations: t,
                traces,
                final_states: screened,
                sampled_states,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        if let Some(boost) = cfg.boost {
            if target - level <= boost.trigger {
                n = boost.sample_size;
            }
        }
        samples = repopulate(model, &screened, level, n, cfg.chain_thinning, cfg.seed, t as u64);
        sampled_states += n;
        previous = level;
    }
    Err(SplitError::IterationLimitExceeded { limit: cfg.max_iterations, traces })
}
