//! The contract every counting model implements.
//!
//! A model describes a finite configuration space `X_0` that can be sampled
//! uniformly, an integer score whose maximum (`target_score`) is attained
//! exactly on the solution set, and a Gibbs sweep that leaves the uniform
//! distribution on every level set `{x : score(x) >= threshold}` invariant.
//! The engine, the capture-recapture estimators and the oracles only talk to
//! models through this trait.

use rand::Rng;

/// A counting problem over a finite configuration space.
///
/// Scores live in `[min_score, target_score]`. SAT reports the number of
/// satisfied clauses (target `m`); graph and table models report a
/// non-positive deficit with target `0`.
pub trait CountingModel: Send + Sync {
    type State: Clone + Send + Sync;

    /// The score attained exactly by solutions.
    fn target_score(&self) -> i64;

    /// A lower bound on the score of any configuration.
    fn min_score(&self) -> i64;

    /// Natural log of `|X_0|`.
    fn log_space_size(&self) -> f64;

    /// Short human-readable description of the instance.
    fn describe(&self) -> String;

    /// Draws a configuration uniformly from `X_0`.
    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// Score of a state. Models cache the score inside the state, so this is O(1).
    fn score(&self, state: &Self::State) -> i64;

    /// One systematic Gibbs pass. Requires `score(state) >= threshold` and
    /// preserves it.
    fn gibbs_sweep<R: Rng + ?Sized>(&self, state: &mut Self::State, threshold: i64, rng: &mut R);

    /// Deterministic byte encoding; two states are equal iff their keys are.
    fn canonical_key(&self, state: &Self::State) -> Vec<u8>;

    /// Inverse of [`canonical_key`](Self::canonical_key). Returns `None` for
    /// keys that do not describe a configuration in `X_0`.
    fn state_from_key(&self, key: &[u8]) -> Option<Self::State>;

    /// `true` iff the state is a solution.
    fn is_solution(&self, state: &Self::State) -> bool {
        self.score(state) == self.target_score()
    }
}

/// Packs a bit sequence little-endian within each byte.
pub(crate) fn pack_bits<I: IntoIterator<Item = bool>>(bits: I, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len.div_ceil(8)];
    for (i, b) in bits.into_iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

/// Unpacks `len` bits written by [`pack_bits`]. Rejects keys of the wrong
/// length or with stray padding bits set.
pub(crate) fn unpack_bits(key: &[u8], len: usize) -> Option<Vec<bool>> {
    if key.len() != len.div_ceil(8) {
        return None;
    }
    let bits: Vec<bool> = (0..len).map(|i| key[i / 8] >> (i % 8) & 1 == 1).collect();
    let padding_clean = (len..key.len() * 8).all(|i| key[i / 8] >> (i % 8) & 1 == 0);
    padding_clean.then_some(bits)
}
