//! Capture-recapture estimators on top of a finished splitting run.
//!
//! Two batches are drawn from the final level by Gibbs chains started at
//! the surviving elites; the overlap of their distinct states gives the
//! Lincoln-Petersen and Chapman estimates. For solution sets too large to
//! produce any overlap, [`extended_cap_recap`] first shrinks the set with
//! random auxiliary clauses, estimates the shrinking factor, and scales the
//! inner estimate back up.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::CountingModel;
use crate::rng::{stream, Purpose};
use crate::sat::{random_clause, Assignment, CnfInstance};

/// Product estimates above this are handed to the extended estimator by the CLI.
pub const DEFAULT_ECAP_REGIME: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapRecapResult {
    /// Distinct states in the first batch.
    pub n1: usize,
    /// Distinct states in the second batch.
    pub n2: usize,
    pub overlap: usize,
    /// `n1 * n2 / R`; infinite when `R = 0`.
    pub naive_estimate: f64,
    pub chapman_estimate: f64,
    pub chapman_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcapResult {
    pub tau: usize,
    pub c_hat_aux: f64,
    pub inner: CapRecapResult,
    pub log_estimate: f64,
    pub aux_clauses: Vec<Vec<i32>>,
    /// Size of the level-`m` sample used for `c_hat_aux`.
    pub base_samples: usize,
    /// Clauses rejected for pushing `c_hat_aux` below the window.
    pub rejected_clauses: usize,
}

impl EcapResult {
    pub fn estimate(&self) -> f64 {
        self.log_estimate.exp()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapRecapError {
    #[error("batches share no state (n1 = {}, n2 = {}); enlarge them or use the extended estimator", .0.n1, .0.n2)]
    ZeroOverlap(CapRecapResult),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no final states to seed the chains from")]
    NoSeeds,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("every candidate auxiliary clause at step {tau} drove c_hat below {low} ({attempts} attempts)")]
    WindowOvershoot { tau: usize, low: f64, attempts: usize },
    #[error("c_hat still above the window after {max_aux} auxiliary clauses")]
    AuxLimitExceeded { max_aux: usize },
    #[error("relative error needs at least two values with nonzero mean")]
    DegenerateInput,
}

/// Estimates from distinct batch sizes and their overlap.
pub fn cap_recap_counts(n1: usize, n2: usize, overlap: usize) -> Result<CapRecapResult, CapRecapError> {
    if n1 == 0 || n2 == 0 {
        return Err(CapRecapError::EmptyBatch);
    }
    assert!(overlap <= n1.min(n2), "overlap {overlap} exceeds a batch size");
    let (a, b, r) = (n1 as f64, n2 as f64, overlap as f64);
    let result = CapRecapResult {
        n1,
        n2,
        overlap,
        naive_estimate: if overlap == 0 { f64::INFINITY } else { a * b / r },
        chapman_estimate: (a + 1.0) * (b + 1.0) / (r + 1.0) - 1.0,
        chapman_variance: (a + 1.0) * (b + 1.0) * (a - r) * (b - r) / ((r + 1.0).powi(2) * (r + 2.0)),
    };
    if overlap == 0 {
        Err(CapRecapError::ZeroOverlap(result))
    } else {
        Ok(result)
    }
}

/// Deduplicates each batch by canonical key and estimates from the overlap.
pub fn cap_recap<M: CountingModel>(
    model: &M,
    batch1: &[M::State],
    batch2: &[M::State],
) -> Result<CapRecapResult, CapRecapError> {
    let keys = |b: &[M::State]| -> HashSet<Vec<u8>> { b.par_iter().map(|s| model.canonical_key(s)).collect() };
    let k1 = keys(batch1);
    let k2 = keys(batch2);
    let overlap = k1.intersection(&k2).count();
    cap_recap_counts(k1.len(), k2.len(), overlap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchConfig {
    /// Raw states in the first batch, before deduplication.
    pub n1: usize,
    pub n2: usize,
    /// Recorded states per chain.
    pub chain_length: usize,
    /// Gibbs sweeps before each recorded state.
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self { n1: 10_000, n2: 10_000, chain_length: 1, sweeps: 5, seed: 0 }
    }
}

impl BatchConfig {
    fn validate(&self) -> Result<(), CapRecapError> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(CapRecapError::InvalidConfig("batch sizes must be positive".into()));
        }
        if self.chain_length == 0 || self.sweeps == 0 {
            return Err(CapRecapError::InvalidConfig("chain length and sweeps must be positive".into()));
        }
        Ok(())
    }

    /// Gibbs sweeps spent on both batches.
    pub fn sweep_cost(&self) -> usize {
        (self.n1 + self.n2) * self.sweeps
    }
}

/// Draws two batches at the model's target level from chains seeded with
/// `final_states`. The batches use disjoint random streams.
pub fn draw_final_batches<M: CountingModel>(
    model: &M,
    final_states: &[M::State],
    cfg: &BatchConfig,
) -> Result<(Vec<M::State>, Vec<M::State>), CapRecapError> {
    draw_batches_at(model, final_states, cfg, 0)
}

fn draw_batches_at<M: CountingModel>(
    model: &M,
    final_states: &[M::State],
    cfg: &BatchConfig,
    level: u64,
) -> Result<(Vec<M::State>, Vec<M::State>), CapRecapError> {
    cfg.validate()?;
    if final_states.is_empty() {
        return Err(CapRecapError::NoSeeds);
    }
    let b1 = level_samples(model, final_states, cfg.n1, cfg.chain_length, cfg.sweeps, cfg.seed, Purpose::Batch1, level);
    let b2 = level_samples(model, final_states, cfg.n2, cfg.chain_length, cfg.sweeps, cfg.seed, Purpose::Batch2, level);
    Ok((b1, b2))
}

/// `n` states at the target level: chains of `chain_length` recorded states,
/// each started from a seed drawn with replacement.
#[allow(clippy::too_many_arguments)]
fn level_samples<M: CountingModel>(
    model: &M,
    seeds: &[M::State],
    n: usize,
    chain_length: usize,
    sweeps: usize,
    seed: u64,
    purpose: Purpose,
    level: u64,
) -> Vec<M::State> {
    let threshold = model.target_score();
    let chains: Vec<Vec<M::State>> = (0..n.div_ceil(chain_length))
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, purpose, level, i as u64);
            let mut cur = seeds[rng.random_range(0..seeds.len())].clone();
            let len = chain_length.min(n - i * chain_length);
            (0..len)
                .map(|_| {
                    for _ in 0..sweeps {
                        model.gibbs_sweep(&mut cur, threshold, &mut rng);
                    }
                    cur.clone()
                })
                .collect()
        })
        .collect();
    chains.into_iter().flatten().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcapConfig {
    /// Target interval for `c_hat_aux`.
    pub window: (f64, f64),
    pub max_aux: usize,
    /// Replacement clauses tried per step before giving up.
    pub max_retries: usize,
    /// Level-`m` states used to estimate `c_hat_aux`.
    pub base_samples: usize,
    pub batches: BatchConfig,
}

impl Default for EcapConfig {
    fn default() -> Self {
        Self {
            window: (1e-3, 1e-2),
            max_aux: 64,
            max_retries: 32,
            base_samples: 100_000,
            batches: BatchConfig::default(),
        }
    }
}

impl EcapConfig {
    fn validate(&self) -> Result<(), CapRecapError> {
        let (lo, hi) = self.window;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(CapRecapError::InvalidConfig(format!("window [{lo}, {hi}] is not inside (0, 1]")));
        }
        if self.base_samples == 0 {
            return Err(CapRecapError::InvalidConfig("base sample size must be positive".into()));
        }
        self.batches.validate()
    }
}

/// Shrinks the solution set with random 3-clauses until the surviving
/// fraction lands in the window, runs classic capture-recapture on the
/// shrunken instance, and divides the result by that fraction.
pub fn extended_cap_recap(
    inst: &CnfInstance,
    final_states: &[Assignment],
    cfg: &EcapConfig,
) -> Result<EcapResult, CapRecapError> {
    cfg.validate()?;
    if final_states.is_empty() {
        return Err(CapRecapError::NoSeeds);
    }
    let b = &cfg.batches;
    let base = level_samples(inst, final_states, cfg.base_samples, b.chain_length, b.sweeps, b.seed, Purpose::EcapBase, 0);
    let total = base.len() as f64;
    let (low, high) = cfg.window;
    let mut active: Vec<&[bool]> = base.iter().map(|s| s.bits()).collect();
    let mut aux: Vec<Vec<i32>> = Vec::new();
    let mut rejected = 0;
    let mut c_hat = 1.0;
    while c_hat > high {
        if aux.len() == cfg.max_aux {
            return Err(CapRecapError::AuxLimitExceeded { max_aux: cfg.max_aux });
        }
        let tau = aux.len();
        let mut accepted = None;
        for attempt in 0..=cfg.max_retries {
            let mut rng = stream(b.seed, Purpose::EcapClause, tau as u64, attempt as u64);
            let clause = random_clause(inst.n_vars(), 3, &mut rng);
            let survivors: Vec<&[bool]> = active.iter().copied().filter(|x| clause_holds(&clause, x)).collect();
            let c = survivors.len() as f64 / total;
            if c >= low {
                accepted = Some((clause, survivors, c));
                break;
            }
            rejected += 1;
        }
        let Some((clause, survivors, c)) = accepted else {
            return Err(CapRecapError::WindowOvershoot { tau, low, attempts: cfg.max_retries + 1 });
        };
        log::debug!("aux clause {tau}: {clause:?} c_hat={c:.5}");
        aux.push(clause);
        active = survivors;
        c_hat = c;
    }
    let extended = inst.with_extra_clauses(&aux).expect("random clauses are well formed");
    let mut seen = HashSet::new();
    let seeds: Vec<Assignment> = active
        .iter()
        .filter(|x| seen.insert(x.to_vec()))
        .map(|x| extended.assignment(x.to_vec()))
        .collect();
    let (b1, b2) = draw_batches_at(&extended, &seeds, b, aux.len() as u64 + 1)?;
    let inner = cap_recap(&extended, &b1, &b2)?;
    Ok(EcapResult {
        tau: aux.len(),
        c_hat_aux: c_hat,
        log_estimate: inner.chapman_estimate.ln() - c_hat.ln(),
        inner,
        aux_clauses: aux,
        base_samples: base.len(),
        rejected_clauses: rejected,
    })
}

fn clause_holds(clause: &[i32], x: &[bool]) -> bool {
    clause.iter().any(|&l| x[l.unsigned_abs() as usize - 1] == (l > 0))
}

/// `|X_m| = |X_{m+tau}| / c_hat`.
pub fn backward_estimate(inner_estimate: f64, c_hat: f64) -> f64 {
    inner_estimate / c_hat
}

/// Sample standard deviation over the mean.
pub fn relative_error(values: &[f64]) -> Result<f64, CapRecapError> {
    if values.len() < 2 {
        return Err(CapRecapError::DegenerateInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(CapRecapError::DegenerateInput);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt() / mean)
}
