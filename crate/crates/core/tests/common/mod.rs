#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splitcount::graph::EdgeState;
use splitcount::sat::Assignment;
use splitcount::table::TableState;
use splitcount::{CnfInstance, DegreeInstance, TableInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn all_assignments(inst: &CnfInstance) -> Vec<Assignment> {
    let n = inst.n_vars();
    (0u64..1 << n)
        .map(|x| inst.assignment((0..n).map(|i| x >> i & 1 == 1).collect()))
        .collect()
}

pub fn subsets(m: usize, k: usize) -> Vec<Vec<u32>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i as u32);
            go(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, k, &mut Vec::new(), &mut out);
    out
}

pub fn all_edge_sets(inst: &DegreeInstance) -> Vec<EdgeState> {
    subsets(inst.n_slots(), inst.edge_target())
        .into_iter()
        .map(|s| inst.state_from_slots(s))
        .collect()
}

/// Every table meeting the enforced margin of the instance's branch.
pub fn all_tables(inst: &TableInstance) -> Vec<TableState> {
    let (m, n) = (inst.row_sums().len(), inst.col_sums().len());
    assert!(m * n <= 20);
    (0u64..1 << (m * n))
        .filter_map(|x| {
            let rows: Vec<Vec<bool>> =
                (0..m).map(|i| (0..n).map(|j| x >> (i * n + j) & 1 == 1).collect()).collect();
            inst.state_from_matrix(&rows)
        })
        .collect()
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
