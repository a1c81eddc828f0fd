//! Deterministic random streams.
//!
//! Every replication draws from its own ChaCha8 stream keyed by
//! (seed, replication index, purpose), so results do not depend on which
//! worker ran the replication or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream purposes within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Scores = 0,
    Transform = 1,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for grid cell `index` under `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_mul(0xD1B5_4A32_D192_ED03).wrapping_add(1)))
}

pub fn stream(seed: u64, rep: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep.wrapping_mul(2).wrapping_add(purpose as u64));
    rng
}
