//! Hierarchical seed derivation. One master seed fans out into independent
//! streams (graph, data, weight init, per-device rounds) so toggling one
//! subsystem never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_GRAPH: u64 = 1;
pub const DOMAIN_DATA: u64 = 2;
pub const DOMAIN_INIT: u64 = 3;
pub const DOMAIN_SPECS: u64 = 4;
pub const DOMAIN_DEVICE_ROUNDS: u64 = 1000;

/// SplitMix64 over the master seed and a domain tag.
pub fn split(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded stream for one domain.
pub fn stream(master: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split(master, tag))
}

/// Stream for device `index`'s per-round draws.
pub fn device_stream(master: u64, index: usize) -> ChaCha8Rng {
    stream(master, DOMAIN_DEVICE_ROUNDS + index as u64)
}
