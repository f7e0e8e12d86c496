//! Binary contingency tables with prescribed row and column sums.
//!
//! One margin is enforced exactly (every configuration already has the
//! right column sums, say) and the score is minus the total deviation of the
//! other margin. Internally the enforced margin is always stored as the
//! columns of a column-major matrix; the row branch is handled by working on
//! the transpose.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigcount::{binomial, ln_big};
use crate::model::{pack_bits, unpack_bits, CountingModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("infeasible margins: {0}")]
    InfeasibleMargins(String),
    #[error("bad table spec: {0}")]
    Parse(String),
}

/// Which margin the configuration space keeps exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BranchChoice {
    Row,
    Column,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Row,
    Column,
}

/// The JSON instance format: `{"r": [...], "c": [...], "branch": "auto"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub r: Vec<u32>,
    pub c: Vec<u32>,
    #[serde(default)]
    pub branch: BranchChoice,
}

pub fn parse_table_spec(text: &str) -> Result<TableSpec, TableError> {
    serde_json::from_str(text).map_err(|e| TableError::Parse(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct TableInstance {
    row_sums: Vec<u32>,
    col_sums: Vec<u32>,
    branch: Branch,
    // margin scored against, one entry per internal row
    scored: Vec<u32>,
    // margin kept exact, one entry per internal column
    enforced: Vec<u32>,
    log_space_size: f64,
}

fn log_branch_size(cells: usize, sums: &[u32]) -> f64 {
    let product = sums
        .iter()
        .fold(num_bigint::BigUint::from(1u32), |acc, &s| acc * binomial(cells as u64, s as u64));
    ln_big(&product)
}

impl TableInstance {
    pub fn new(row_sums: Vec<u32>, col_sums: Vec<u32>, choice: BranchChoice) -> Result<Self, TableError> {
        let (m, n) = (row_sums.len(), col_sums.len());
        let bad = |msg: String| Err(TableError::InfeasibleMargins(msg));
        if m == 0 || n == 0 {
            return bad("row and column sums must be nonempty".into());
        }
        let (rs, cs): (u64, u64) = (
            row_sums.iter().map(|&x| x as u64).sum(),
            col_sums.iter().map(|&x| x as u64).sum(),
        );
        if rs != cs {
            return bad(format!("row sums total {rs} but column sums total {cs}"));
        }
        if let Some((i, r)) = row_sums.iter().enumerate().find(|(_, &r)| r as usize > n) {
            return bad(format!("row {} sum {r} exceeds {n} columns", i + 1));
        }
        if let Some((j, c)) = col_sums.iter().enumerate().find(|(_, &c)| c as usize > m) {
            return bad(format!("column {} sum {c} exceeds {m} rows", j + 1));
        }
        let column_log = log_branch_size(m, &col_sums);
        let row_log = log_branch_size(n, &row_sums);
        let branch = match choice {
            BranchChoice::Column => Branch::Column,
            BranchChoice::Row => Branch::Row,
            BranchChoice::Auto if row_log < column_log => Branch::Row,
            BranchChoice::Auto => Branch::Column,
        };
        let (scored, enforced, log_space_size) = match branch {
            Branch::Column => (row_sums.clone(), col_sums.clone(), column_log),
            Branch::Row => (col_sums.clone(), row_sums.clone(), row_log),
        };
        Ok(Self { row_sums, col_sums, branch, scored, enforced, log_space_size })
    }

    pub fn from_spec(spec: &TableSpec) -> Result<Self, TableError> {
        Self::new(spec.r.clone(), spec.c.clone(), spec.branch)
    }

    pub fn row_sums(&self) -> &[u32] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u32] {
        &self.col_sums
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    fn inner_rows(&self) -> usize {
        self.scored.len()
    }

    /// Maps an original `(row, col)` cell to its internal column-major offset.
    fn offset(&self, row: usize, col: usize) -> usize {
        let (i, j) = match self.branch {
            Branch::Column => (row, col),
            Branch::Row => (col, row),
        };
        j * self.inner_rows() + i
    }

    /// Builds a state from a row-major 0-1 matrix. Returns `None` when the
    /// enforced margin is violated or the shape is wrong.
    pub fn state_from_matrix(&self, rows: &[Vec<bool>]) -> Option<TableState> {
        let (m, n) = (self.row_sums.len(), self.col_sums.len());
        if rows.len() != m || rows.iter().any(|r| r.len() != n) {
            return None;
        }
        let mut bits = vec![false; m * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                bits[self.offset(i, j)] = b;
            }
        }
        self.state_from_bits(bits)
    }

    fn state_from_bits(&self, bits: Vec<bool>) -> Option<TableState> {
        let rows = self.inner_rows();
        let mut sums = vec![0u32; rows];
        for (j, &target) in self.enforced.iter().enumerate() {
            let col = &bits[j * rows..(j + 1) * rows];
            if col.iter().filter(|&&b| b).count() as u32 != target {
                return None;
            }
            for (i, _) in col.iter().enumerate().filter(|(_, &b)| b) {
                sums[i] += 1;
            }
        }
        let score = self.deficit_score(&sums);
        Some(TableState { bits, sums, score })
    }

    fn deficit_score(&self, sums: &[u32]) -> i64 {
        -sums
            .iter()
            .zip(&self.scored)
            .map(|(&a, &t)| (a as i64 - t as i64).abs())
            .sum::<i64>()
    }

    #[inline]
    fn gain(&self, sums: &[u32], i: usize) -> i64 {
        if sums[i] < self.scored[i] {
            1
        } else {
            -1
        }
    }
}

/// A 0-1 matrix meeting the enforced margin, with the other margin's sums
/// maintained incrementally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableState {
    bits: Vec<bool>,
    sums: Vec<u32>,
    score: i64,
}

impl TableState {
    /// Row-major copy of the table.
    pub fn to_matrix(&self, inst: &TableInstance) -> Vec<Vec<bool>> {
        (0..inst.row_sums.len())
            .map(|i| (0..inst.col_sums.len()).map(|j| self.bits[inst.offset(i, j)]).collect())
            .collect()
    }
}

impl CountingModel for TableInstance {
    type State = TableState;

    fn target_score(&self) -> i64 {
        0
    }

    fn min_score(&self) -> i64 {
        -2 * self.scored.iter().map(|&x| x as i64).sum::<i64>()
    }

    fn log_space_size(&self) -> f64 {
        self.log_space_size
    }

    fn describe(&self) -> String {
        format!(
            "table {}x{} branch={:?}",
            self.row_sums.len(),
            self.col_sums.len(),
            self.branch
        )
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> TableState {
        let rows = self.inner_rows();
        let mut bits = vec![false; rows * self.enforced.len()];
        for (j, &c) in self.enforced.iter().enumerate() {
            for i in index::sample(rng, rows, c as usize) {
                bits[j * rows + i] = true;
            }
        }
        self.state_from_bits(bits).expect("sampled columns meet the enforced margin")
    }

    fn score(&self, state: &TableState) -> i64 {
        state.score
    }

    fn gibbs_sweep<R: Rng + ?Sized>(&self, state: &mut TableState, threshold: i64, rng: &mut R) {
        debug_assert!(state.score >= threshold);
        let rows = self.inner_rows();
        let mut ones: Vec<usize> = Vec::with_capacity(rows);
        let mut admissible: Vec<usize> = Vec::with_capacity(rows);
        for j in 0..self.enforced.len() {
            let base = j * rows;
            ones.clear();
            ones.extend((0..rows).filter(|&i| state.bits[base + i]));
            // random visiting order within the column, see the graph kernel
            ones.shuffle(rng);
            for &i in &ones {
                state.bits[base + i] = false;
                state.sums[i] -= 1;
                state.score -= self.gain(&state.sums, i);
                admissible.clear();
                admissible.extend((0..rows).filter(|&r| {
                    !state.bits[base + r] && state.score + self.gain(&state.sums, r) >= threshold
                }));
                debug_assert!(admissible.contains(&i));
                let r = admissible[rng.random_range(0..admissible.len())];
                state.score += self.gain(&state.sums, r);
                state.sums[r] += 1;
                state.bits[base + r] = true;
            }
        }
    }

    fn canonical_key(&self, state: &TableState) -> Vec<u8> {
        let (m, n) = (self.row_sums.len(), self.col_sums.len());
        let bits = (0..m).flat_map(|i| (0..n).map(move |j| (i, j)));
        pack_bits(bits.map(|(i, j)| state.bits[self.offset(i, j)]), m * n)
    }

    fn state_from_key(&self, key: &[u8]) -> Option<TableState> {
        let (m, n) = (self.row_sums.len(), self.col_sums.len());
        let flat = unpack_bits(key, m * n)?;
        let rows: Vec<Vec<bool>> = flat.chunks(n).map(|c| c.to_vec()).collect();
        self.state_from_matrix(&rows)
    }
}
