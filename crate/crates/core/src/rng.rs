//! Counter-based random streams.
//!
//! Every consumer of randomness draws from a ChaCha8 stream whose 256-bit
//! key is the little-endian concatenation `(master seed, domain, a, b)`.
//! A stream therefore depends only on its coordinates, never on the order
//! in which other streams were used, which keeps parallel rollouts
//! reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// `a` = camera frame index, `b` = 0.
    Perception = 1,
    /// `a` = control step index, `b` = rollout index.
    Mppi = 2,
    /// Scenario-level randomization (initial offsets and the like).
    Setup = 3,
}

pub fn stream(master_seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
