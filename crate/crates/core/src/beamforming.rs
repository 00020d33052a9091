//! Beamforming gains, baselines and one end-to-end 2D-CCS alignment.

use num_complex::Complex64;
use rand::Rng;

use crate::ccs::{acquire, estimate_best_beam, recover_beamspace_with, sample_shift_set, BaseMatrix, Mask, OmpOptions};
use crate::error::{invalid, Result};
use crate::grid::{argmax_lowest, dft2, ComplexGrid, FlatIndex};
use crate::prior::AoDPrior;
use crate::rng::complex_gaussian;

/// `|<H, P>|^2`.
pub fn bf_gain(h: &ComplexGrid, p: &BaseMatrix) -> Result<f64> {
    Ok(h.inner(p.grid())?.norm_sqr())
}

/// Conjugate beamformer `e^{j phase(H)} / N`; zero entries get phase 0.
pub fn perfect_csi_bf(h: &ComplexGrid) -> Result<BaseMatrix> {
    let n = h.side()?;
    let inv_n = 1.0 / n as f64;
    Ok(BaseMatrix::new_unchecked(h.map(|v| {
        if v.norm_sqr() > 0.0 {
            v / v.norm() * inv_n
        } else {
            Complex64::new(inv_n, 0.0)
        }
    })))
}

/// Gain of [`perfect_csi_bf`], `(||vec H||_1 / N)^2`.
pub fn perfect_gain(h: &ComplexGrid) -> Result<f64> {
    let n = h.side()? as f64;
    Ok((h.l1_norm() / n).powi(2))
}

/// 2D-DFT beam whose projection `<H, B_k>` is beamspace entry `x_k`.
pub fn dft_beam(n: usize, k: FlatIndex) -> BaseMatrix {
    let (a, b) = k.to_rc(n);
    let w = -2.0 * std::f64::consts::PI / n as f64;
    BaseMatrix::from_phases(n, |i, j| w * ((i * a + j * b) % n) as f64)
}

/// Conjugate beamformer on the channel rebuilt from a beamspace estimate.
pub fn conjugate_bf_from_beamspace(x_hat: &ComplexGrid) -> Result<BaseMatrix> {
    perfect_csi_bf(&dft2(x_hat)?)
}

/// `10 log10(gain / sigma^2)`.
pub fn rsrp_db(gain: f64, sigma2: f64) -> f64 {
    10.0 * (gain / sigma2).log10()
}

/// `10 log10(perfect / gain)`.
pub fn bf_loss_db(gain: f64, perfect: f64) -> f64 {
    10.0 * (perfect / gain).log10()
}

/// Sweeps every DFT beam with one noisy measurement each.
pub fn exhaustive_sweep<R: Rng + ?Sized>(x: &ComplexGrid, sigma2: f64, rng: &mut R) -> FlatIndex {
    FlatIndex(argmax_lowest(
        x.as_slice().iter().map(|&v| (v + complex_gaussian(rng, sigma2)).norm_sqr()),
    ))
}

/// Sweeps the `m` most probable beams of `prior`, keeping the strongest.
pub fn top_m_sweep<R: Rng + ?Sized>(
    x: &ComplexGrid,
    prior: &AoDPrior,
    m: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<FlatIndex> {
    if prior.len() != x.as_slice().len() {
        return Err(invalid("prior and beamspace sizes differ"));
    }
    if m == 0 || m > prior.len() {
        return Err(invalid(format!("m = {m} outside 1..={}", prior.len())));
    }
    let mut cand: Vec<usize> = prior.ranked().into_iter().take(m).map(|k| k.0).collect();
    // Measure in index order so the draw sequence matches the exhaustive sweep.
    cand.sort_unstable();
    let power: Vec<f64> = cand
        .iter()
        .map(|&k| (x.as_slice()[k] + complex_gaussian(rng, sigma2)).norm_sqr())
        .collect();
    Ok(FlatIndex(cand[argmax_lowest(power)]))
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub x_hat: ComplexGrid,
    /// Strongest recovered direction; `None` only for an all-zero estimate.
    pub chosen: Option<FlatIndex>,
    pub bf: BaseMatrix,
    pub gain: f64,
}

/// Samples `m` shifts, measures `h` through `base`, recovers the beamspace
/// against `mask` and beamforms conjugately on the estimate.
#[allow(clippy::too_many_arguments)]
pub fn ccs_align<R: Rng + ?Sized, Q: Rng + ?Sized>(
    h: &ComplexGrid,
    base: &BaseMatrix,
    mask: &Mask,
    m: usize,
    sigma2: f64,
    opts: &OmpOptions,
    sampling_rng: &mut R,
    noise_rng: &mut Q,
) -> Result<Alignment> {
    let n = h.side()?;
    let omega = sample_shift_set(n, m, sampling_rng)?;
    let y = acquire(h, base, &omega, sigma2, noise_rng)?;
    let opts = OmpOptions {
        sparsity: opts.sparsity.min(m),
        ..*opts
    };
    let rec = recover_beamspace_with(&y, mask, &opts)?;
    let chosen = estimate_best_beam(&rec.x_hat).ok();
    let bf = conjugate_bf_from_beamspace(&rec.x_hat)?;
    let gain = bf_gain(h, &bf)?;
    Ok(Alignment {
        x_hat: rec.x_hat,
        chosen,
        bf,
        gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::idft2;
    use crate::rng::{stream, Domain};

    fn random_grid(n: usize, seed: u64) -> ComplexGrid {
        let mut rng = stream(seed, Domain::MonteCarlo, 0);
        ComplexGrid::from_fn(n, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn gain_examples() {
        let h = ComplexGrid::filled(2, Complex64::new(1.0, 0.0));
        let p = perfect_csi_bf(&h).unwrap();
        assert!(p.grid().max_abs_diff(&ComplexGrid::filled(2, Complex64::new(0.5, 0.0))) < 1e-15);
        assert!((bf_gain(&h, &p).unwrap() - 4.0).abs() < 1e-12);

        let h = random_grid(8, 1);
        let p = perfect_csi_bf(&h).unwrap();
        let g = bf_gain(&h, &p).unwrap();
        assert!((g - perfect_gain(&h).unwrap()).abs() < 1e-9 * g);
        let opposing = BaseMatrix::new(p.grid().scale(-1.0).conj()).unwrap();
        assert!(bf_gain(&h, &opposing).unwrap() <= g);
    }

    #[test]
    fn zero_entries_get_zero_phase() {
        let mut h = ComplexGrid::zeros(2);
        h[(0, 1)] = Complex64::new(0.0, 3.0);
        let p = perfect_csi_bf(&h).unwrap();
        assert_eq!(p.grid()[(0, 0)], Complex64::new(0.5, 0.0));
        assert!((p.grid()[(0, 1)] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn dft_beams_read_beamspace() {
        let h = random_grid(4, 2);
        let x = idft2(&h).unwrap();
        for k in 0..16 {
            let v = h.inner(dft_beam(4, FlatIndex(k)).grid()).unwrap();
            assert!((v - x.as_slice()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn sweeps() {
        let h = random_grid(4, 3);
        let x = idft2(&h).unwrap();
        let mut rng = stream(0, Domain::Noise, 0);
        assert_eq!(exhaustive_sweep(&x, 0.0, &mut rng), x.argmax_abs());
        let tie = ComplexGrid::filled(2, Complex64::new(1.0, 0.0));
        assert_eq!(exhaustive_sweep(&tie, 0.0, &mut rng), FlatIndex(0));

        let prior = AoDPrior::from_weights(&(0..16).map(|k| (k % 5) as f64).collect::<Vec<_>>()).unwrap();
        let mut a = stream(0, Domain::Noise, 1);
        let mut b = stream(0, Domain::Noise, 1);
        assert_eq!(top_m_sweep(&x, &prior, 16, 0.3, &mut a).unwrap(), exhaustive_sweep(&x, 0.3, &mut b));
        assert_eq!(top_m_sweep(&x, &prior, 1, 0.3, &mut a).unwrap(), prior.argmax());
        let oracle = AoDPrior::one_hot(16, x.argmax_abs().0);
        assert_eq!(top_m_sweep(&x, &oracle, 1, 0.0, &mut a).unwrap(), x.argmax_abs());
        assert!(top_m_sweep(&x, &prior, 0, 0.0, &mut a).is_err());
    }

    #[test]
    fn noiseless_full_sampling_recovers_one_sparse_channel() {
        let n = 8;
        let x = ComplexGrid::delta(n, 2, 5, Complex64::new(3.0, -1.0));
        let h = dft2(&x).unwrap();
        let base = BaseMatrix::chirp(n);
        let mask = base.mask();
        let mut s = stream(0, Domain::Sampling, 0);
        let mut v = stream(0, Domain::Noise, 0);
        let out = ccs_align(&h, &base, &mask, n * n, 0.0, &OmpOptions::sparsity(4), &mut s, &mut v).unwrap();
        assert_eq!(out.chosen, Some(FlatIndex(2 * n + 5)));
        assert!((out.gain - perfect_gain(&h).unwrap()).abs() < 1e-9);
    }
}
