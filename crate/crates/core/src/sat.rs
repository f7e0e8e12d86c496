//! CNF counting model: DIMACS ingestion, clause-count scoring, single-site
//! Gibbs kernel and the `Ax >= b` linear encoding.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::model::{pack_bits, unpack_bits, CountingModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("instance has no variables")]
    NoVariables,
    #[error("instance has no clauses")]
    NoClauses,
    #[error("clause {clause} is empty")]
    EmptyClause { clause: usize },
    #[error("clause {clause}: literal {literal} outside 1..={n_vars}")]
    LiteralOutOfRange { clause: usize, literal: i32, n_vars: usize },
    #[error("clause {clause} contains both x{var} and its negation")]
    Tautology { clause: usize, var: u32 },
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
}

/// A CNF formula with a per-variable occurrence index.
///
/// Literals are DIMACS-style signed 1-based variable indices. Repeated
/// literals inside a clause are collapsed on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfInstance {
    n_vars: usize,
    clauses: Vec<Vec<i32>>,
    // occurrences[v] = (clause, positive) for every clause mentioning v
    occurrences: Vec<Vec<(u32, bool)>>,
}

impl CnfInstance {
    pub fn new(n_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self, CnfError> {
        if n_vars == 0 {
            return Err(CnfError::NoVariables);
        }
        if clauses.is_empty() {
            return Err(CnfError::NoClauses);
        }
        let mut cleaned = Vec::with_capacity(clauses.len());
        for (ci, clause) in clauses.into_iter().enumerate() {
            if clause.is_empty() {
                return Err(CnfError::EmptyClause { clause: ci });
            }
            let mut lits: Vec<i32> = Vec::with_capacity(clause.len());
            for lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > n_vars {
                    return Err(CnfError::LiteralOutOfRange { clause: ci, literal: lit, n_vars });
                }
                if lits.contains(&-lit) {
                    return Err(CnfError::Tautology { clause: ci, var: lit.unsigned_abs() });
                }
                if !lits.contains(&lit) {
                    lits.push(lit);
                }
            }
            cleaned.push(lits);
        }
        let occurrences = build_occurrences(n_vars, &cleaned);
        Ok(Self { n_vars, clauses: cleaned, occurrences })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// Clause ids (with polarity) touching variable `var` (0-based).
    pub fn occurrences(&self, var: usize) -> &[(u32, bool)] {
        &self.occurrences[var]
    }

    /// Returns a new instance with `extra` clauses appended.
    pub fn with_extra_clauses(&self, extra: &[Vec<i32>]) -> Result<Self, CnfError> {
        let mut clauses = self.clauses.clone();
        clauses.extend_from_slice(extra);
        Self::new(self.n_vars, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.n_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                let _ = write!(out, "{lit} ");
            }
            out.push_str("0\n");
        }
        out
    }

    /// Builds a state for the given assignment, computing its clause counters.
    pub fn assignment(&self, bits: Vec<bool>) -> Assignment {
        assert_eq!(bits.len(), self.n_vars, "assignment length must equal n_vars");
        let true_counts: Vec<u16> = self
            .clauses
            .iter()
            .map(|c| c.iter().filter(|&&l| literal_true(l, &bits)).count() as u16)
            .collect();
        let score = true_counts.iter().filter(|&&c| c > 0).count() as i64;
        Assignment { bits, true_counts, score }
    }

    /// Score of `state` if variable `var` were flipped.
    fn flipped_score(&self, state: &Assignment, var: usize) -> i64 {
        let current = state.bits[var];
        let mut score = state.score;
        for &(c, positive) in &self.occurrences[var] {
            let count = state.true_counts[c as usize];
            if positive == current {
                if count == 1 {
                    score -= 1;
                }
            } else if count == 0 {
                score += 1;
            }
        }
        score
    }

    fn flip(&self, state: &mut Assignment, var: usize) {
        let current = state.bits[var];
        for &(c, positive) in &self.occurrences[var] {
            let count = &mut state.true_counts[c as usize];
            if positive == current {
                *count -= 1;
                if *count == 0 {
                    state.score -= 1;
                }
            } else {
                if *count == 0 {
                    state.score += 1;
                }
                *count += 1;
            }
        }
        state.bits[var] = !current;
    }
}

fn build_occurrences(n_vars: usize, clauses: &[Vec<i32>]) -> Vec<Vec<(u32, bool)>> {
    let mut occ = vec![Vec::new(); n_vars];
    for (ci, clause) in clauses.iter().enumerate() {
        for &lit in clause {
            occ[lit.unsigned_abs() as usize - 1].push((ci as u32, lit > 0));
        }
    }
    occ
}

#[inline]
fn literal_true(lit: i32, bits: &[bool]) -> bool {
    bits[lit.unsigned_abs() as usize - 1] == (lit > 0)
}

/// Parses DIMACS CNF text.
pub fn parse_dimacs(text: &str) -> Result<CnfInstance, CnfError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let err = |line: usize, msg: String| CnfError::Parse { line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            // SATLIB end marker
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(lineno, "duplicate problem line".into()));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(err(lineno, format!("malformed problem line {line:?}")));
            }
            let n = parts[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad variable count {:?}", parts[2])))?;
            let m = parts[3]
                .parse()
                .map_err(|_| err(lineno, format!("bad clause count {:?}", parts[3])))?;
            header = Some((n, m));
            continue;
        }
        let Some((n_vars, _)) = header else {
            return Err(err(lineno, "clause before problem line".into()));
        };
        for tok in line.split_whitespace() {
            let lit: i32 = tok.parse().map_err(|_| err(lineno, format!("bad literal {tok:?}")))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(err(lineno, format!("empty clause {}", clauses.len() + 1)));
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                if lit.unsigned_abs() as usize > n_vars {
                    return Err(err(lineno, format!("literal {lit} outside 1..={n_vars}")));
                }
                current.push(lit);
            }
        }
    }
    let Some((n_vars, declared)) = header else {
        return Err(err(0, "missing problem line".into()));
    };
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != declared {
        return Err(CnfError::ClauseCountMismatch { declared, found: clauses.len() });
    }
    CnfInstance::new(n_vars, clauses)
}

/// Number of clauses with at least one true literal, computed from scratch.
pub fn sat_score(inst: &CnfInstance, x: &[bool]) -> i64 {
    inst.clauses
        .iter()
        .filter(|c| c.iter().any(|&l| literal_true(l, x)))
        .count() as i64
}

/// The linear system `Ax >= b` equivalent to the formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearEncoding {
    pub a: Vec<Vec<i8>>,
    pub b: Vec<i64>,
}

impl LinearEncoding {
    pub fn satisfied_by(&self, x: &[bool]) -> bool {
        self.a.iter().zip(&self.b).all(|(row, &bi)| {
            let lhs: i64 = row.iter().zip(x).map(|(&a, &xj)| if xj { a as i64 } else { 0 }).sum();
            lhs >= bi
        })
    }
}

pub fn encode_linear(inst: &CnfInstance) -> LinearEncoding {
    let mut a = vec![vec![0i8; inst.n_vars]; inst.clauses.len()];
    let mut b = Vec::with_capacity(inst.clauses.len());
    for (row, clause) in a.iter_mut().zip(&inst.clauses) {
        for &lit in clause {
            row[lit.unsigned_abs() as usize - 1] = if lit > 0 { 1 } else { -1 };
        }
        b.push(1 - row.iter().filter(|&&v| v == -1).count() as i64);
    }
    LinearEncoding { a, b }
}

/// A clause of `width` distinct variables with uniform polarities.
pub fn random_clause<R: Rng + ?Sized>(n_vars: usize, width: usize, rng: &mut R) -> Vec<i32> {
    let width = width.min(n_vars);
    index::sample(rng, n_vars, width)
        .into_iter()
        .map(|v| {
            let var = v as i32 + 1;
            if rng.random_bool(0.5) {
                var
            } else {
                -var
            }
        })
        .collect()
}

/// Uniform random 3-CNF with `n_clauses` clauses.
pub fn random_3sat<R: Rng + ?Sized>(n_vars: usize, n_clauses: usize, rng: &mut R) -> CnfInstance {
    let clauses = (0..n_clauses).map(|_| random_clause(n_vars, 3, rng)).collect();
    CnfInstance::new(n_vars, clauses).expect("generated clauses are well formed")
}

/// Truth assignment plus per-clause true-literal counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    bits: Vec<bool>,
    true_counts: Vec<u16>,
    score: i64,
}

impl Assignment {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl CountingModel for CnfInstance {
    type State = Assignment;

    fn target_score(&self) -> i64 {
        self.clauses.len() as i64
    }

    fn min_score(&self) -> i64 {
        0
    }

    fn log_space_size(&self) -> f64 {
        self.n_vars as f64 * std::f64::consts::LN_2
    }

    fn describe(&self) -> String {
        format!("cnf n={} m={}", self.n_vars, self.clauses.len())
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let bits = (0..self.n_vars).map(|_| rng.random_bool(0.5)).collect();
        self.assignment(bits)
    }

    fn score(&self, state: &Assignment) -> i64 {
        state.score
    }

    fn gibbs_sweep<R: Rng + ?Sized>(&self, state: &mut Assignment, threshold: i64, rng: &mut R) {
        debug_assert!(state.score >= threshold);
        for var in 0..self.n_vars {
            if self.flipped_score(state, var) >= threshold && rng.random_bool(0.5) {
                self.flip(state, var);
            }
        }
    }

    fn canonical_key(&self, state: &Assignment) -> Vec<u8> {
        pack_bits(state.bits.iter().copied(), self.n_vars)
    }

    fn state_from_key(&self, key: &[u8]) -> Option<Assignment> {
        unpack_bits(key, self.n_vars).map(|bits| self.assignment(bits))
    }
}
