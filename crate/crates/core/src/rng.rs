//! Random stream derivation.
//!
//! Every Monte Carlo figure in the crate is driven by a single 64-bit seed.
//! Independent streams are derived from `(seed, purpose, index)`: the seed
//! and the purpose tag are mixed into the ChaCha key, the index selects the
//! ChaCha stream. Two paths with different indices therefore never share
//! randomness, and the result of path `i` does not depend on which worker
//! produced it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams of different roles apart even when they share
/// a seed and an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Path = 1,
    Coupling = 2,
    Gluing = 3,
    Auxiliary = 4,
    Chain = 5,
    Bootstrap = 6,
    Check = 7,
    Start = 8,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let key = splitmix(seed ^ splitmix(purpose as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Derive a child seed, for operations that themselves derive many streams
/// (a coupling run spawns auxiliary path sets, for instance).
pub fn child_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(purpose as u64)) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
