//! Gerchberg–Saxton phase retrieval for unit-modulus base matrices.
//!
//! The base matrix `P` and the mask it realizes, `Z = n * idft2(P_FC)`
//! (equivalently `Z = n * conj(idft2(P))`), form a Fourier pair. Only the
//! magnitudes are prescribed: `|P| = 1/n` everywhere and `|Z| = target`.
//! Alternating projections between the two magnitude sets never increase the
//! mask-domain residual `|| |Z| - target ||_F`.

use num_complex::Complex64;
use rand::Rng;

use crate::ccs::BaseMatrix;
use crate::error::{invalid, Result};
use crate::grid::{dft2, idft2, ComplexGrid};
use crate::rng::uniform_phase;

/// Default iteration count.
pub const DEFAULT_GS_ITERATIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct GsOutcome {
    pub base: BaseMatrix,
    /// Residual of each iterate. Non-increasing up to rounding.
    pub residuals: Vec<f64>,
}

impl GsOutcome {
    /// Residual of the returned base matrix (the best iterate).
    pub fn final_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn unit_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Mask realized by a base matrix: `n * conj(idft2(P))`.
pub fn realized_mask(p: &ComplexGrid) -> Result<ComplexGrid> {
    let n = p.side()? as f64;
    Ok(idft2(p)?.conj().scale(n))
}

fn project_base(z: &ComplexGrid) -> Result<ComplexGrid> {
    let n = z.side()?;
    let inv_n = 1.0 / n as f64;
    // P' = dft2(conj Z) / n, then keep only the phase.
    Ok(dft2(&z.conj())?.map(|v| unit_phase(v) * inv_n))
}

fn residual(z: &ComplexGrid, target: &[f64]) -> f64 {
    z.as_slice()
        .iter()
        .zip(target)
        .map(|(v, t)| (v.norm() - t).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Runs `iterations` rounds from uniform-random initial mask phases.
pub fn gerchberg_saxton<R: Rng + ?Sized>(
    target: &[f64],
    iterations: usize,
    rng: &mut R,
) -> Result<GsOutcome> {
    let init: Vec<f64> = target.iter().map(|_| uniform_phase(rng)).collect();
    gerchberg_saxton_from(target, &init, iterations)
}

/// Same as [`gerchberg_saxton`] with caller-supplied initial mask phases.
pub fn gerchberg_saxton_from(
    target: &[f64],
    init_phase: &[f64],
    iterations: usize,
) -> Result<GsOutcome> {
    if iterations == 0 {
        return Err(invalid("iteration count must be at least 1"));
    }
    let n = (target.len() as f64).sqrt().round() as usize;
    if n * n != target.len() || n < 2 {
        return Err(invalid(format!("target length {} is not a square grid", target.len())));
    }
    if init_phase.len() != target.len() {
        return Err(invalid("initial phase length mismatch"));
    }
    if target.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(invalid("target magnitudes must be finite and nonnegative"));
    }

    let mut z = ComplexGrid::from_vec(
        n,
        n,
        target
            .iter()
            .zip(init_phase)
            .map(|(&t, &ph)| Complex64::from_polar(t, ph))
            .collect(),
    )?;
    let mut best: Option<(f64, ComplexGrid)> = None;
    let mut residuals = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let p = project_base(&z)?;
        let realized = realized_mask(&p)?;
        let res = residual(&realized, target);
        residuals.push(res);
        if best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, p));
        }
        z = ComplexGrid::from_vec(
            n,
            n,
            realized
                .as_slice()
                .iter()
                .zip(target)
                .map(|(&v, &t)| unit_phase(v) * t)
                .collect(),
        )?;
    }
    let (_, p) = best.expect("iterations >= 1");
    Ok(GsOutcome {
        base: BaseMatrix::new_unchecked(p),
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn random_base(n: usize, seed: u64) -> ComplexGrid {
        let mut rng = stream(seed, Domain::PhaseInit, 99);
        ComplexGrid::from_fn(n, |_, _| {
            Complex64::from_polar(1.0 / n as f64, uniform_phase(&mut rng))
        })
    }

    #[test]
    fn output_is_unimodular_and_residual_monotone() {
        for (n, seed) in [(4, 1), (8, 2), (16, 3)] {
            let target = realized_mask(&random_base(n, seed)).unwrap().magnitudes();
            let mut rng = stream(seed, Domain::PhaseInit, 0);
            let out = gerchberg_saxton(&target, 60, &mut rng).unwrap();
            let inv_n = 1.0 / n as f64;
            for v in out.base.grid().as_slice() {
                assert!((v.norm() - inv_n).abs() < 1e-15);
            }
            for w in out.residuals.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14, "{w:?}");
            }
            let recomputed = residual(&realized_mask(out.base.grid()).unwrap(), &target);
            assert!((recomputed - out.final_residual()).abs() < 1e-12);
        }
    }

    #[test]
    fn starting_at_a_solution_stays_there() {
        let n = 8;
        let p0 = random_base(n, 7);
        let z0 = realized_mask(&p0).unwrap();
        let target = z0.magnitudes();
        let init: Vec<f64> = z0.as_slice().iter().map(|v| v.arg()).collect();
        let out = gerchberg_saxton_from(&target, &init, 5).unwrap();
        assert!(out.final_residual() < 1e-12);
        assert!(out.base.grid().max_abs_diff(&p0) < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = stream(0, Domain::PhaseInit, 0);
        assert!(gerchberg_saxton(&[1.0; 16], 0, &mut rng).is_err());
        assert!(gerchberg_saxton(&[1.0; 15], 3, &mut rng).is_err());
        assert!(gerchberg_saxton(&[f64::NAN; 16], 3, &mut rng).is_err());
        assert!(gerchberg_saxton_from(&[1.0; 16], &[0.0; 4], 3).is_err());
    }
}
