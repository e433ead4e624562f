//! Seed derivation and the project-wide deterministic RNG.
//!
//! Every random draw in the pipeline goes through a [`ChaCha8Rng`] seeded
//! from a master seed plus a purpose tag, so independent stages (shape
//! generation, scatter, episodes, training) have decoupled streams and any
//! one of them can be replayed in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mix a master seed with a purpose tag and an index into a fresh 64-bit
/// stream seed (FNV-1a over the tag, then splitmix64 finalization).
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= master.rotate_left(17);
    h = h.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    // splitmix64 finalizer
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    h
}

/// Deterministic RNG for a (master, tag, index) triple.
pub fn stream(master: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}
