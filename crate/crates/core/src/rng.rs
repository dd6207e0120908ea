//! Seeded, splittable random streams.
//!
//! Every trial owns one ChaCha8 stream selected by its trial id, so results
//! never depend on how trials are scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub type Stream = ChaCha8Rng;

/// The stream for `trial` under the master `seed`.
pub fn trial_stream(seed: u64, trial: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

const SCALE: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform on `[0, 1)`.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * SCALE
}

/// Uniform on `(0, 1]`.
#[inline]
pub fn uniform_open0<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * SCALE
}

/// Standard exponential.
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    -libm::log(uniform_open0(rng))
}
