//! Deterministic seed derivation.
//!
//! Every random stream in a calibration run is derived from the master seed
//! and the coordinates of the draw (window, generation, individual,
//! replicate), so results never depend on how work is scheduled on threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep the derived seeds of different purposes apart.
pub mod tag {
    pub const GA: u64 = 0x6761;
    pub const EVAL: u64 = 0x6576;
    pub const ADJUST: u64 = 0x6164;
    pub const CHECKPOINT: u64 = 0x636b;
    pub const FIT: u64 = 0x6674;
    pub const SYNTHETIC: u64 = 0x7379;
    pub const REPLICATE: u64 = 0x7270;
    pub const INIT: u64 = 0x696e;
}

#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed together with a sequence of coordinates.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn rng_from(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}
