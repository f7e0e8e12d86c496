//! Counter-based random streams.
//!
//! Every chain, sample and selection step draws from its own ChaCha stream
//! keyed by `(seed, purpose, level)` and indexed by a stream number, so the
//! output of a run does not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    InitialSample = 1,
    Chain = 2,
    Extension = 3,
    Batch1 = 4,
    Batch2 = 5,
    EcapBase = 6,
    EcapClause = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns the stream `index` of the family `(seed, purpose, level)`.
pub fn stream(seed: u64, purpose: Purpose, level: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut acc = splitmix64(seed);
    for (i, word) in [purpose as u64, level, 0x5EED, 0xC0DE].into_iter().enumerate() {
        acc = splitmix64(acc ^ word);
        key[i * 8..(i + 1) * 8].copy_from_slice(&acc.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
