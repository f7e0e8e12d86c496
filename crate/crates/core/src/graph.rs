//! Labeled simple graphs with a prescribed degree sequence.
//!
//! The configuration space is every set of `k = sum(d)/2` edges of the
//! complete graph `K_n`; the score is `-sum |deg(v) - d_v|`. The Gibbs kernel
//! lifts one edge at a time and re-places it uniformly among the slots that
//! keep the score above the current level.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use thiserror::Error;

use crate::bigcount::{binomial, ln_big};
use crate::model::{pack_bits, unpack_bits, CountingModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("infeasible degree sequence: {0}")]
    InfeasibleDegrees(String),
    #[error("bad degree file: {0}")]
    Parse(String),
}

/// A degree sequence together with the lexicographic edge table of `K_n`.
#[derive(Debug, Clone)]
pub struct DegreeInstance {
    degrees: Vec<u32>,
    edges: Vec<(u32, u32)>,
    edge_target: usize,
    log_space_size: f64,
}

impl DegreeInstance {
    pub fn new(degrees: Vec<u32>) -> Result<Self, GraphError> {
        let n = degrees.len();
        if n < 2 {
            return Err(GraphError::InfeasibleDegrees(format!("need at least 2 vertices, got {n}")));
        }
        if let Some((i, &d)) = degrees.iter().enumerate().find(|(_, &d)| d as usize > n - 1) {
            return Err(GraphError::InfeasibleDegrees(format!(
                "vertex {} has degree {d} > n-1 = {}",
                i + 1,
                n - 1
            )));
        }
        let total: u64 = degrees.iter().map(|&d| d as u64).sum();
        if total % 2 != 0 {
            return Err(GraphError::InfeasibleDegrees(format!("degree sum {total} is odd")));
        }
        let edges: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|u| (u + 1..n as u32).map(move |v| (u, v)))
            .collect();
        let edge_target = (total / 2) as usize;
        if edge_target > edges.len() {
            return Err(GraphError::InfeasibleDegrees(format!(
                "{edge_target} edges requested but K_{n} has {}",
                edges.len()
            )));
        }
        let log_space_size = ln_big(&binomial(edges.len() as u64, edge_target as u64));
        let inst = Self { degrees, edges, edge_target, log_space_size };
        if !inst.is_graphical() {
            log::warn!("degree sequence fails the Erdos-Gallai test; no realization exists");
        }
        Ok(inst)
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn n_vertices(&self) -> usize {
        self.degrees.len()
    }

    /// Number of edge slots `n(n-1)/2`.
    pub fn n_slots(&self) -> usize {
        self.edges.len()
    }

    /// Number of edges in every configuration.
    pub fn edge_target(&self) -> usize {
        self.edge_target
    }

    pub fn edge(&self, slot: usize) -> (u32, u32) {
        self.edges[slot]
    }

    /// Erdos-Gallai test.
    pub fn is_graphical(&self) -> bool {
        let mut d: Vec<u64> = self.degrees.iter().map(|&x| x as u64).collect();
        d.sort_unstable_by(|a, b| b.cmp(a));
        let n = d.len();
        let mut prefix = 0u64;
        for k in 1..=n {
            prefix += d[k - 1];
            let tail: u64 = d[k..].iter().map(|&x| x.min(k as u64)).sum();
            if prefix > (k * (k - 1)) as u64 + tail {
                return false;
            }
        }
        prefix % 2 == 0
    }

    /// Builds a state from a set of slot indices.
    pub fn state_from_slots(&self, slots: Vec<u32>) -> EdgeState {
        let mut chosen = vec![false; self.edges.len()];
        let mut deg = vec![0u32; self.degrees.len()];
        for &s in &slots {
            assert!(!chosen[s as usize], "slot {s} chosen twice");
            chosen[s as usize] = true;
            let (u, v) = self.edges[s as usize];
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let score = self.deficit_score(&deg);
        EdgeState { slots, chosen, deg, score }
    }

    fn deficit_score(&self, deg: &[u32]) -> i64 {
        -deg.iter()
            .zip(&self.degrees)
            .map(|(&a, &d)| (a as i64 - d as i64).abs())
            .sum::<i64>()
    }

    #[inline]
    fn endpoint_gain(&self, deg: &[u32], v: u32) -> i64 {
        if deg[v as usize] < self.degrees[v as usize] {
            1
        } else {
            -1
        }
    }

    fn remove_slot(&self, state: &mut EdgeState, slot: u32) {
        let (u, v) = self.edges[slot as usize];
        state.chosen[slot as usize] = false;
        state.deg[u as usize] -= 1;
        state.deg[v as usize] -= 1;
        // undoing an insertion: gain is measured at the reduced degrees
        state.score -= self.endpoint_gain(&state.deg, u) + self.endpoint_gain(&state.deg, v);
    }

    fn insert_slot(&self, state: &mut EdgeState, slot: u32) {
        let (u, v) = self.edges[slot as usize];
        state.score += self.endpoint_gain(&state.deg, u) + self.endpoint_gain(&state.deg, v);
        state.chosen[slot as usize] = true;
        state.deg[u as usize] += 1;
        state.deg[v as usize] += 1;
    }
}

/// Parses a whitespace-separated list of nonnegative integers.
pub fn parse_degrees(text: &str) -> Result<Vec<u32>, GraphError> {
    let degrees: Vec<u32> = text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| GraphError::Parse(format!("bad degree {t:?}"))))
        .collect::<Result<_, _>>()?;
    if degrees.is_empty() {
        return Err(GraphError::Parse("no degrees given".into()));
    }
    Ok(degrees)
}

/// A `k`-edge subset of `K_n` with incrementally maintained degrees.
#[derive(Debug, Clone)]
pub struct EdgeState {
    // chosen slots; the order carries no meaning
    slots: Vec<u32>,
    chosen: Vec<bool>,
    deg: Vec<u32>,
    score: i64,
}

impl EdgeState {
    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    pub fn degrees(&self) -> &[u32] {
        &self.deg
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.chosen[slot]
    }
}

impl CountingModel for DegreeInstance {
    type State = EdgeState;

    fn target_score(&self) -> i64 {
        0
    }

    fn min_score(&self) -> i64 {
        -(self.degrees.iter().map(|&d| d as i64).sum::<i64>() + 2 * self.edge_target as i64)
    }

    fn log_space_size(&self) -> f64 {
        self.log_space_size
    }

    fn describe(&self) -> String {
        format!("degrees n={} edges={}", self.degrees.len(), self.edge_target)
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> EdgeState {
        let slots = index::sample(rng, self.edges.len(), self.edge_target)
            .into_iter()
            .map(|s| s as u32)
            .collect();
        self.state_from_slots(slots)
    }

    fn score(&self, state: &EdgeState) -> i64 {
        state.score
    }

    fn gibbs_sweep<R: Rng + ?Sized>(&self, state: &mut EdgeState, threshold: i64, rng: &mut R) {
        debug_assert!(state.score >= threshold);
        // Edges are visited in a fresh random order each sweep. A fixed
        // ascending-slot scan makes the update depend on which edge sits at
        // which rank and does not leave the uniform law invariant.
        let mut order: Vec<usize> = (0..state.slots.len()).collect();
        order.shuffle(rng);
        let mut admissible: Vec<u32> = Vec::with_capacity(self.edges.len());
        for p in order {
            let old = state.slots[p];
            self.remove_slot(state, old);
            admissible.clear();
            for (slot, &(u, v)) in self.edges.iter().enumerate() {
                if state.chosen[slot] {
                    continue;
                }
                let gain = self.endpoint_gain(&state.deg, u) + self.endpoint_gain(&state.deg, v);
                if state.score + gain >= threshold {
                    admissible.push(slot as u32);
                }
            }
            debug_assert!(admissible.contains(&old));
            let new = admissible[rng.random_range(0..admissible.len())];
            self.insert_slot(state, new);
            state.slots[p] = new;
        }
    }

    fn canonical_key(&self, state: &EdgeState) -> Vec<u8> {
        pack_bits(state.chosen.iter().copied(), self.edges.len())
    }

    fn state_from_key(&self, key: &[u8]) -> Option<EdgeState> {
        let bits = unpack_bits(key, self.edges.len())?;
        let slots: Vec<u32> =
            bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32).collect();
        (slots.len() == self.edge_target).then(|| self.state_from_slots(slots))
    }
}
