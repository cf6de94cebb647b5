//! Seeded random streams.
//!
//! Every random quantity in a trial comes from its own ChaCha stream keyed
//! by the trial seed, so channel, symbols and noise can be regenerated
//! independently and identically on any thread.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent sub-streams drawn within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Symbols = 2,
    Noise = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Circularly-symmetric complex normal with unit variance.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
