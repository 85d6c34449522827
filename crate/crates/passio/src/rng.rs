//! Deterministic random numbers.
//!
//! Every stochastic operation in the crate takes an explicit `u64` seed and
//! draws from ChaCha8, whose output stream is specified by the algorithm and
//! therefore identical across platforms and releases. Parallel work (trees,
//! subjects, trials) never shares a generator: each unit derives its own seed
//! with [`derive_seed`], so results are independent of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The crate-wide generator. 8-round ChaCha: fast, splittable by reseeding,
/// platform-independent.
pub type Rng = ChaCha8Rng;

/// Seed a fresh generator.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from a base seed and a context path, e.g.
/// `derive_seed(base, &[subject_idx, iteration])`. SplitMix64 chaining: stable,
/// well-mixed, and cheap.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(base ^ 0x9e37_79b9_7f4a_7c15);
    for &part in path {
        state = splitmix64(state ^ splitmix64(part.wrapping_add(0xbf58_476d_1ce4_e5b9)));
    }
    state
}

/// Derive a child seed namespaced by a label, so e.g. "bootstrap" and
/// "thresholds" streams can never collide even with equal numeric paths.
pub fn derive_seed_labeled(base: u64, label: &str, path: &[u64]) -> u64 {
    derive_seed(base ^ fnv1a(label.as_bytes()), path)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
