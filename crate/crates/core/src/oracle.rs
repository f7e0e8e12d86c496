//! Exact counters for small instances.
//!
//! SAT is plain enumeration over bitmasks. Graphs and tables are counted by
//! recursive assignment over a multiset of residual degrees (row sums for
//! tables); the number of completions depends only on that multiset, so it
//! doubles as the memo key.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::bigcount::binomial;
use crate::graph::DegreeInstance;
use crate::sat::CnfInstance;
use crate::table::TableInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    /// Cap on enumerated assignments (SAT) or expanded search nodes (graphs, tables).
    pub max_configurations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self { max_configurations: 1 << 26 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration needs more than {budget} configurations")]
    BudgetExceeded { budget: u64 },
}

/// Number of satisfying assignments.
pub fn exact_count_sat(inst: &CnfInstance, budget: OracleBudget) -> Result<BigUint, OracleError> {
    let n = inst.n_vars();
    if n > 63 || (1u64 << n) > budget.max_configurations {
        return Err(OracleError::BudgetExceeded { budget: budget.max_configurations });
    }
    let masks: Vec<(u64, u64)> = inst
        .clauses()
        .iter()
        .map(|c| {
            c.iter().fold((0u64, 0u64), |(pos, neg), &l| {
                let bit = 1u64 << (l.unsigned_abs() - 1);
                if l > 0 {
                    (pos | bit, neg)
                } else {
                    (pos, neg | bit)
                }
            })
        })
        .collect();
    let total = 1u64 << n;
    let chunk = 1u64 << 14;
    let count: u64 = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(total);
            (lo..hi)
                .filter(|&x| masks.iter().all(|&(p, q)| x & p != 0 || !x & q != 0))
                .count() as u64
        })
        .sum();
    Ok(BigUint::from(count))
}

/// Number of labeled simple graphs realizing the degree sequence.
pub fn exact_count_graphs(inst: &DegreeInstance, budget: OracleBudget) -> Result<BigUint, OracleError> {
    count_degree_sequence(inst.degrees(), budget)
}

/// Number of labeled simple graphs with the given degrees.
pub fn count_degree_sequence(degrees: &[u32], budget: OracleBudget) -> Result<BigUint, OracleError> {
    if degrees.iter().map(|&d| d as u64).sum::<u64>() % 2 == 1 {
        return Ok(BigUint::zero());
    }
    let mut search = Search::new(budget);
    search.graphs(normalize(degrees.to_vec()))
}

/// Number of 0-1 matrices with the instance margins.
pub fn exact_count_tables(inst: &TableInstance, budget: OracleBudget) -> Result<BigUint, OracleError> {
    count_tables(inst.row_sums(), inst.col_sums(), budget)
}

/// Number of 0-1 matrices with row sums `rows` and column sums `cols`.
pub fn count_tables(rows: &[u32], cols: &[u32], budget: OracleBudget) -> Result<BigUint, OracleError> {
    let rs: u64 = rows.iter().map(|&x| x as u64).sum();
    let cs: u64 = cols.iter().map(|&x| x as u64).sum();
    if rs != cs {
        return Ok(BigUint::zero());
    }
    let mut search = Search::new(budget);
    search.tables(0, cols, normalize(rows.to_vec()))
}

/// Membership test for SAT: every clause has a true literal.
pub fn accepts_sat(inst: &CnfInstance, bits: &[bool]) -> bool {
    inst.clauses()
        .iter()
        .all(|c| c.iter().any(|&l| bits[l.unsigned_abs() as usize - 1] == (l > 0)))
}

/// Membership test for graphs: the chosen edges realize every degree.
pub fn accepts_graph(inst: &DegreeInstance, slots: &[u32]) -> bool {
    let mut deg = vec![0u32; inst.n_vertices()];
    for &s in slots {
        let (u, v) = inst.edge(s as usize);
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    deg == inst.degrees()
}

/// Membership test for tables: both margins match.
pub fn accepts_table(inst: &TableInstance, rows: &[Vec<bool>]) -> bool {
    let row_ok = rows
        .iter()
        .zip(inst.row_sums())
        .all(|(r, &s)| r.iter().filter(|&&b| b).count() == s as usize);
    let col_ok = inst
        .col_sums()
        .iter()
        .enumerate()
        .all(|(j, &s)| rows.iter().filter(|r| r[j]).count() == s as usize);
    rows.len() == inst.row_sums().len() && row_ok && col_ok
}

/// Drops zeros and sorts descending.
fn normalize(mut v: Vec<u32>) -> Vec<u32> {
    v.retain(|&x| x > 0);
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

struct Search {
    budget: u64,
    nodes: u64,
    graph_memo: HashMap<Vec<u32>, BigUint>,
    table_memo: HashMap<(usize, Vec<u32>), BigUint>,
}

impl Search {
    fn new(budget: OracleBudget) -> Self {
        Self {
            budget: budget.max_configurations,
            nodes: 0,
            graph_memo: HashMap::new(),
            table_memo: HashMap::new(),
        }
    }

    fn tick(&mut self) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            Err(OracleError::BudgetExceeded { budget: self.budget })
        } else {
            Ok(())
        }
    }

    fn graphs(&mut self, res: Vec<u32>) -> Result<BigUint, OracleError> {
        let Some((&r, rest)) = res.split_first() else {
            return Ok(BigUint::one());
        };
        if let Some(v) = self.graph_memo.get(&res) {
            return Ok(v.clone());
        }
        let mut total = BigUint::zero();
        if r as usize <= rest.len() {
            for (next, weight) in self.choose(rest, r)? {
                total += weight * self.graphs(next)?;
            }
        }
        self.graph_memo.insert(res, total.clone());
        Ok(total)
    }

    fn tables(&mut self, j: usize, cols: &[u32], res: Vec<u32>) -> Result<BigUint, OracleError> {
        if j == cols.len() {
            return Ok(if res.is_empty() { BigUint::one() } else { BigUint::zero() });
        }
        let key = (j, res);
        if let Some(v) = self.table_memo.get(&key) {
            return Ok(v.clone());
        }
        let (_, res) = key;
        let mut total = BigUint::zero();
        let remaining = (cols.len() - j) as u32;
        if (cols[j] as usize) <= res.len() && res.first().is_none_or(|&m| m <= remaining) {
            for (next, weight) in self.choose(&res, cols[j])? {
                total += weight * self.tables(j + 1, cols, next)?;
            }
        }
        self.table_memo.insert((j, res), total.clone());
        Ok(total)
    }

    /// All ways to decrement `k` distinct entries of the sorted multiset
    /// `res`, grouped by the resulting multiset with their multiplicities.
    fn choose(&mut self, res: &[u32], k: u32) -> Result<Vec<(Vec<u32>, BigUint)>, OracleError> {
        let mut groups: Vec<(u32, u32)> = Vec::new();
        for &x in res {
            match groups.last_mut() {
                Some((v, c)) if *v == x => *c += 1,
                _ => groups.push((x, 1)),
            }
        }
        let mut out = Vec::new();
        let mut picks = vec![0u32; groups.len()];
        self.distribute(&groups, 0, k, &mut picks, &mut out)?;
        Ok(out)
    }

    fn distribute(
        &mut self,
        groups: &[(u32, u32)],
        g: usize,
        left: u32,
        picks: &mut Vec<u32>,
        out: &mut Vec<(Vec<u32>, BigUint)>,
    ) -> Result<(), OracleError> {
        if g == groups.len() {
            if left == 0 {
                self.tick()?;
                let mut next = Vec::new();
                let mut weight = BigUint::one();
                for (&(v, c), &p) in groups.iter().zip(picks.iter()) {
                    weight *= binomial(c as u64, p as u64);
                    next.extend(std::iter::repeat_n(v - 1, p as usize));
                    next.extend(std::iter::repeat_n(v, (c - p) as usize));
                }
                out.push((normalize(next), weight));
            }
            return Ok(());
        }
        let capacity: u32 = groups[g..].iter().map(|&(_, c)| c).sum();
        if capacity < left {
            return Ok(());
        }
        for p in 0..=groups[g].1.min(left) {
            picks[g] = p;
            self.distribute(groups, g + 1, left - p, picks, out)?;
        }
        picks[g] = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::random_3sat;
    use crate::table::BranchChoice;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn brute_graphs(d: &[u32]) -> u64 {
        let n = d.len();
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        (0u64..1 << edges.len())
            .filter(|mask| {
                let mut deg = vec![0u32; n];
                for (e, &(i, j)) in edges.iter().enumerate() {
                    if mask >> e & 1 == 1 {
                        deg[i] += 1;
                        deg[j] += 1;
                    }
                }
                deg == d
            })
            .count() as u64
    }

    fn brute_tables(r: &[u32], c: &[u32]) -> u64 {
        let (m, n) = (r.len(), c.len());
        (0u64..1 << (m * n))
            .filter(|mask| {
                let at = |i: usize, j: usize| (mask >> (i * n + j) & 1) as u32;
                (0..m).all(|i| (0..n).map(|j| at(i, j)).sum::<u32>() == r[i])
                    && (0..n).all(|j| (0..m).map(|i| at(i, j)).sum::<u32>() == c[j])
            })
            .count() as u64
    }

    #[test]
    fn sat_trivial_cases() {
        let b = OracleBudget::default();
        let one = CnfInstance::new(3, vec![vec![1]]).unwrap();
        assert_eq!(exact_count_sat(&one, b).unwrap(), big(4));
        let contra = CnfInstance::new(1, vec![vec![1], vec![-1]]).unwrap();
        assert_eq!(exact_count_sat(&contra, b).unwrap(), big(0));
    }

    #[test]
    fn sat_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let inst = random_3sat(10, 35, &mut rng);
            let direct = (0u32..1 << 10)
                .filter(|x| {
                    let bits: Vec<bool> = (0..10).map(|i| x >> i & 1 == 1).collect();
                    accepts_sat(&inst, &bits)
                })
                .count() as u64;
            assert_eq!(exact_count_sat(&inst, OracleBudget::default()).unwrap(), big(direct));
        }
    }

    #[test]
    fn sat_snapshot_n12() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inst = random_3sat(12, 30, &mut rng);
        let got = exact_count_sat(&inst, OracleBudget::default()).unwrap();
        assert_eq!(got, big(SAT_N12_SNAPSHOT));
    }

    const SAT_N12_SNAPSHOT: u64 = 86;

    #[test]
    fn sat_budget() {
        let inst = CnfInstance::new(20, vec![vec![1]]).unwrap();
        let tight = OracleBudget { max_configurations: 1 << 19 };
        assert!(matches!(exact_count_sat(&inst, tight), Err(OracleError::BudgetExceeded { .. })));
    }

    #[test]
    fn sat_variable_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let inst = random_3sat(11, 40, &mut rng);
        let mut perm: Vec<i32> = (1..=11).collect();
        perm.shuffle(&mut rng);
        let relabeled: Vec<Vec<i32>> = inst
            .clauses()
            .iter()
            .map(|c| c.iter().map(|&l| l.signum() * perm[l.unsigned_abs() as usize - 1]).collect())
            .collect();
        let other = CnfInstance::new(11, relabeled).unwrap();
        let b = OracleBudget::default();
        assert_eq!(exact_count_sat(&inst, b).unwrap(), exact_count_sat(&other, b).unwrap());
    }

    #[test]
    fn graph_counts() {
        let b = OracleBudget::default();
        assert_eq!(count_degree_sequence(&[1, 1], b).unwrap(), big(1));
        let mut d = vec![5, 6];
        d.extend([1; 11]);
        assert_eq!(count_degree_sequence(&d, b).unwrap(), big(7392));
        let inst = DegreeInstance::new(d).unwrap();
        assert_eq!(exact_count_graphs(&inst, b).unwrap(), big(7392));
        assert_eq!(count_degree_sequence(&[3, 3, 1, 1], b).unwrap(), big(0));
        assert_eq!(count_degree_sequence(&[1, 1, 1], b).unwrap(), big(0));
    }

    #[test]
    fn graph_counts_match_brute_force() {
        let b = OracleBudget::default();
        for d in [
            vec![2, 2, 2, 1, 3],
            vec![2, 2, 2, 2, 2],
            vec![1, 1, 1, 1],
            vec![3, 3, 2, 2, 2, 2],
            vec![4, 1, 1, 1, 1],
            vec![2, 2, 2, 2, 2, 2],
            vec![3, 2, 2, 2, 1, 0],
        ] {
            assert_eq!(count_degree_sequence(&d, b).unwrap(), big(brute_graphs(&d)), "{d:?}");
        }
    }

    #[test]
    fn graph_count_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut d = vec![3, 3, 2, 2, 2, 2, 1, 1];
        let b = OracleBudget::default();
        let base = count_degree_sequence(&d, b).unwrap();
        for _ in 0..5 {
            d.shuffle(&mut rng);
            assert_eq!(count_degree_sequence(&d, b).unwrap(), base);
        }
    }

    #[test]
    fn graph_budget() {
        let d = vec![3u32; 30];
        let tight = OracleBudget { max_configurations: 10 };
        assert!(matches!(count_degree_sequence(&d, tight), Err(OracleError::BudgetExceeded { .. })));
    }

    #[test]
    fn table_counts() {
        let b = OracleBudget::default();
        assert_eq!(count_tables(&[1, 1], &[1, 1], b).unwrap(), big(2));
        assert_eq!(count_tables(&[1, 1, 1], &[1, 1, 1], b).unwrap(), big(6));
        assert_eq!(count_tables(&[2; 4], &[2; 4], b).unwrap(), big(90));
        assert_eq!(count_tables(&[2, 1], &[1, 1], b).unwrap(), big(0));
        let inst = TableInstance::new(vec![2; 12], vec![2; 12], BranchChoice::Auto).unwrap();
        assert_eq!(exact_count_tables(&inst, b).unwrap(), BigUint::from(21_959_547_410_077_200u64));
    }

    #[test]
    fn finch_table_count() {
        let r = [14, 13, 14, 10, 12, 2, 10, 1, 10, 11, 6, 2];
        let c = [3, 3, 10, 9, 9, 7, 8, 9, 7, 8, 2, 9, 3, 6, 8, 2, 2];
        let got = count_tables(&r, &c, OracleBudget::default()).unwrap();
        // the commonly quoted 67,149,106,137,567,600 is this value rounded
        assert_eq!(got, BigUint::from(67_149_106_137_567_626u64));
    }

    #[test]
    fn table_counts_match_brute_force() {
        let b = OracleBudget::default();
        for (r, c) in [
            (vec![2, 1, 1], vec![1, 2, 1]),
            (vec![2, 2, 1], vec![2, 1, 2]),
            (vec![3, 1, 2, 0], vec![1, 2, 1, 2]),
            (vec![1, 2], vec![1, 1, 1]),
        ] {
            assert_eq!(count_tables(&r, &c, b).unwrap(), big(brute_tables(&r, &c)), "{r:?} {c:?}");
        }
    }

    #[test]
    fn table_count_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut r = vec![3, 2, 2, 1, 4, 2];
        let mut c = vec![2, 3, 1, 3, 2, 3];
        let b = OracleBudget::default();
        let base = count_tables(&r, &c, b).unwrap();
        assert_eq!(count_tables(&c, &r, b).unwrap(), base);
        for _ in 0..5 {
            r.shuffle(&mut rng);
            c.shuffle(&mut rng);
            assert_eq!(count_tables(&r, &c, b).unwrap(), base);
        }
    }

    #[test]
    fn membership_tests() {
        let g = DegreeInstance::new(vec![1, 1]).unwrap();
        assert!(accepts_graph(&g, &[0]));
        assert!(!accepts_graph(&g, &[]));
        let t = TableInstance::new(vec![1, 1], vec![1, 1], BranchChoice::Auto).unwrap();
        assert!(accepts_table(&t, &[vec![true, false], vec![false, true]]));
        assert!(!accepts_table(&t, &[vec![true, true], vec![false, false]]));
    }
}
