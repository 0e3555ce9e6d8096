//! Random streams.
//!
//! Each replication gets its own ChaCha8 stream keyed by the master seed and
//! selected by the replication index, so a replication's draws never depend
//! on which worker ran it or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type RandomStream = ChaCha8Rng;

/// Default master seed.
pub const DEFAULT_SEED: u64 = 0xB1EF;

/// Stream for replication `index` under `master_seed`.
pub fn replication_stream(master_seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives a sub-seed so that distinct pipeline stages sharing one master
/// seed do not reuse streams. SplitMix64 finalizer.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    let mut z = master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on the open interval `(0, 1)`.
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Exponential draw with the given rate.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(open01(rng)) / rate
}
