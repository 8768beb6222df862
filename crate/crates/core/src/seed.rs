//! Named RNG substreams derived from one master seed.
//!
//! Every stochastic component asks for its own stream keyed by a label and a
//! few indices (generation, candidate, grid), so results never depend on the
//! order in which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed, a label and an index path into a child seed.
pub fn derive(seed: u64, label: &str, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for b in label.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    for &p in path {
        h = splitmix64(h ^ p);
    }
    h
}

pub fn stream(seed: u64, label: &str, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, label, path))
}
