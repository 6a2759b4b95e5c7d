//! Seeded RNG plumbing.
//!
//! Every stochastic component takes an explicit 64-bit seed and derives its
//! stream from ChaCha8, so runs are reproducible across platforms. Substream
//! derivation mixes a label into the seed so that independent components
//! (weight init, data shuffling, noise, per-sample generation) never share a
//! stream by accident.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG used everywhere in the simulator.
pub type Rng = ChaCha8Rng;

/// Build an RNG from a bare seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from a parent seed and a stream label.
///
/// SplitMix64 finalizer over the xor of the parent and the label hash; cheap
/// and well distributed.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(parent ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
