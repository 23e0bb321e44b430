//! Seeded random streams. Every consumer draws from its own ChaCha stream
//! keyed by (seed, epoch, purpose), so adding draws in one stage never
//! shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Arrivals = 1,
    ClusterLoad = 2,
    Perturbation = 3,
    Sparrow = 4,
    Layout = 5,
}

pub fn stream(seed: u64, epoch: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((epoch << 8) | purpose as u64);
    rng
}
