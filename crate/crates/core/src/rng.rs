//! Seeded random streams.
//!
//! Every independent unit of work (a realization, a trial, a Monte Carlo
//! block) gets its own ChaCha stream derived from `(seed, domain, index)`, so
//! results do not depend on scheduling or thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Stream domains keep e.g. channel draws and noise draws of the same index apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Channel = 1,
    Noise = 2,
    Sampling = 3,
    PhaseInit = 4,
    Trial = 5,
    MonteCarlo = 6,
}

/// Deterministic stream for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    rng.set_stream(index);
    rng
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    if var == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Uniform phase in (-pi, pi].
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    std::f64::consts::PI - rng.random::<f64>() * 2.0 * std::f64::consts::PI
}
