//! 2D convolutional compressive sensing: acquisition through circulant shifts
//! of one base matrix and greedy recovery of the beamspace.
//!
//! A full sweep of all `n^2` shifts yields `G = H * P_FC`, and
//! `idft2(G) = X .* Z` with `X = idft2(H)` and `Z = n * idft2(P_FC)`. A
//! measurement at shift `(r, c)` therefore reads one 2D-DFT sample of the
//! masked beamspace:
//!
//! ```text
//! y = dft2(X .* Z)(r, c) + v = (1/n) sum_{a,b} x_ab z_ab w^(r a + c b) + v
//! ```
//!
//! and recovery works on the linear model `y = A x + v` whose column for
//! direction `(a, b)` is that subsampled DFT atom scaled by `z_ab`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};
use crate::grid::{circ_conv2, circ_shift, flip_conjugate, idft2, ComplexGrid, FlatIndex, ShiftCoord};
use crate::gs::{gerchberg_saxton, realized_mask};
use crate::rng::complex_gaussian;

/// Default OMP sparsity.
pub const DEFAULT_SPARSITY: usize = 4;

/// Unit-modulus base matrix, `|P(k, l)| = 1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMatrix {
    p: ComplexGrid,
}

impl BaseMatrix {
    pub fn new(p: ComplexGrid) -> Result<Self> {
        let n = p.side()?;
        let inv_n = 1.0 / n as f64;
        if p.as_slice().iter().any(|z| (z.norm() - inv_n).abs() > 1e-12) {
            return Err(invalid("base matrix entries must have magnitude 1/n"));
        }
        Ok(BaseMatrix { p })
    }

    pub(crate) fn new_unchecked(p: ComplexGrid) -> Self {
        debug_assert!(BaseMatrix::new(p.clone()).is_ok());
        BaseMatrix { p }
    }

    /// Entrywise `exp(i phase) / n`.
    pub fn from_phases(n: usize, phase: impl Fn(usize, usize) -> f64) -> Self {
        let inv_n = 1.0 / n as f64;
        BaseMatrix {
            p: ComplexGrid::from_fn(n, |r, c| Complex64::from_polar(inv_n, phase(r, c))),
        }
    }

    /// Quadratic-phase (chirp) base matrix with a flat mask, `|Z| = 1`.
    pub fn chirp(n: usize) -> Self {
        let pi = std::f64::consts::PI;
        let nf = n as f64;
        let q = |i: usize| {
            let i = i as f64;
            if n.is_multiple_of(2) {
                pi * i * i / nf
            } else {
                pi * i * (i + 1.0) / nf
            }
        };
        Self::from_phases(n, |r, c| q(r) + q(c))
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    /// The mask this base matrix realizes.
    pub fn mask(&self) -> Mask {
        Mask {
            z: realized_mask(&self.p).expect("square grid"),
        }
    }
}

/// 2D-DFT-domain mask `Z = n * idft2(P_FC)`; `||Z||_F = n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    z: ComplexGrid,
}

impl Mask {
    pub fn new(z: ComplexGrid) -> Result<Self> {
        let n = z.side()? as f64;
        if (z.frobenius_norm() - n).abs() > 1e-9 * n {
            return Err(invalid(format!(
                "mask norm {} differs from n = {n}",
                z.frobenius_norm()
            )));
        }
        Ok(Mask { z })
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.z.n()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.z.magnitudes()
    }

    pub fn is_nonzero_everywhere(&self) -> bool {
        self.z.as_slice().iter().all(|v| v.norm() > 0.0)
    }
}

/// Distinct circulant shifts used for one acquisition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingSet {
    n: usize,
    coords: Vec<ShiftCoord>,
}

impl SamplingSet {
    pub fn new(n: usize, coords: Vec<ShiftCoord>) -> Result<Self> {
        if coords.is_empty() || coords.len() > n * n {
            return Err(invalid(format!("need 1..={} shifts, got {}", n * n, coords.len())));
        }
        let mut seen = vec![false; n * n];
        for s in &coords {
            if s.r >= n || s.c >= n {
                return Err(invalid(format!("shift ({}, {}) out of range", s.r, s.c)));
            }
            let k = s.r * n + s.c;
            if seen[k] {
                return Err(invalid(format!("duplicate shift ({}, {})", s.r, s.c)));
            }
            seen[k] = true;
        }
        Ok(SamplingSet { n, coords })
    }

    /// All `n^2` shifts in row-major order.
    pub fn full(n: usize) -> Self {
        SamplingSet {
            n,
            coords: (0..n * n).map(|k| ShiftCoord { r: k / n, c: k % n }).collect(),
        }
    }

    pub fn coords(&self) -> &[ShiftCoord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub y: Vec<Complex64>,
    pub omega: SamplingSet,
    pub sigma2: f64,
}

/// `m` shifts drawn uniformly without replacement from `[n] x [n]`.
pub fn sample_shift_set<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<SamplingSet> {
    if m == 0 || m > n * n {
        return Err(invalid(format!("m = {m} outside 1..={}", n * n)));
    }
    let coords = rand::seq::index::sample(rng, n * n, m)
        .into_iter()
        .map(|k| ShiftCoord { r: k / n, c: k % n })
        .collect();
    SamplingSet::new(n, coords)
}

fn check_dims(h: &ComplexGrid, p: &BaseMatrix, omega: &SamplingSet) -> Result<usize> {
    let n = h.side()?;
    if p.n() != n || omega.n() != n {
        return Err(dim(format!(
            "channel {n}x{n}, base {0}x{0}, shifts over {1}x{1}",
            p.n(),
            omega.n()
        )));
    }
    Ok(n)
}

/// Noiseless measurements as physical projections `<H, shift(P, s)>`.
pub fn acquire_inner_product(h: &ComplexGrid, p: &BaseMatrix, omega: &SamplingSet) -> Result<Vec<Complex64>> {
    check_dims(h, p, omega)?;
    omega
        .coords()
        .iter()
        .map(|&s| h.inner(&circ_shift(p.grid(), s)?))
        .collect()
}

/// Noiseless measurements as samples of `H * P_FC`.
pub fn acquire_convolution(h: &ComplexGrid, p: &BaseMatrix, omega: &SamplingSet) -> Result<Vec<Complex64>> {
    check_dims(h, p, omega)?;
    let g = circ_conv2(h, &flip_conjugate(p.grid())?)?;
    Ok(omega.coords().iter().map(|s| g[(s.r, s.c)]).collect())
}

/// Acquires `|omega|` noisy 2D-CCS measurements of `h`.
pub fn acquire<R: Rng + ?Sized>(
    h: &ComplexGrid,
    p: &BaseMatrix,
    omega: &SamplingSet,
    sigma2: f64,
    rng: &mut R,
) -> Result<MeasurementVector> {
    if !(sigma2 >= 0.0) {
        return Err(invalid("noise variance must be nonnegative"));
    }
    let mut y = acquire_convolution(h, p, omega)?;
    #[cfg(debug_assertions)]
    {
        let direct = acquire_inner_product(h, p, omega)?;
        let scale = h.frobenius_norm().max(1.0);
        for (a, b) in y.iter().zip(&direct) {
            debug_assert!((a - b).norm() <= 1e-9 * scale, "acquisition routes disagree");
        }
    }
    for v in &mut y {
        *v += complex_gaussian(rng, sigma2);
    }
    Ok(MeasurementVector {
        y,
        omega: omega.clone(),
        sigma2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpOptions {
    /// Maximum number of atoms.
    pub sparsity: usize,
    /// Stop once the residual energy drops to this level (e.g. `M sigma^2`).
    /// Checked from the second atom on.
    pub residual_floor: f64,
}

impl OmpOptions {
    pub fn sparsity(sparsity: usize) -> Self {
        OmpOptions {
            sparsity,
            residual_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Recovery {
    /// Beamspace estimate, at most `sparsity` nonzeros.
    pub x_hat: ComplexGrid,
    pub support: Vec<FlatIndex>,
    /// `||r_i||_2` before the first and after each iteration.
    pub residual_norms: Vec<f64>,
}

/// OMP with the default stopping rule (`sparsity` atoms or zero residual).
pub fn recover_beamspace(y: &MeasurementVector, mask: &Mask, sparsity: usize) -> Result<Recovery> {
    recover_beamspace_with(y, mask, &OmpOptions::sparsity(sparsity))
}

fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonal matching pursuit over the masked partial 2D-DFT dictionary.
///
/// Atoms are selected by their correlation `|a_k^H r|` with the mask-scaled
/// columns, so low-mask directions are penalized. All correlations of one
/// iteration come from a single inverse 2D-DFT of the residual scattered
/// onto the shift grid.
pub fn recover_beamspace_with(y: &MeasurementVector, mask: &Mask, opts: &OmpOptions) -> Result<Recovery> {
    let n = mask.n();
    let m = y.y.len();
    if y.omega.n() != n || y.omega.len() != m {
        return Err(dim("measurement vector does not match mask or sampling set"));
    }
    if opts.sparsity == 0 {
        return Err(invalid("sparsity must be at least 1"));
    }
    if opts.sparsity > m {
        return Err(invalid(format!("sparsity {} exceeds {m} measurements", opts.sparsity)));
    }
    if !mask.is_nonzero_everywhere() {
        return Err(invalid("mask has zero entries"));
    }
    let z = mask.grid().as_slice();
    let inv_n = 1.0 / n as f64;
    let coords = y.omega.coords();
    let w = -2.0 * std::f64::consts::PI / n as f64;
    let atom = |k: usize| -> Vec<Complex64> {
        let (a, b) = (k / n, k % n);
        coords
            .iter()
            .map(|s| Complex64::from_polar(inv_n, w * ((s.r * a + s.c * b) % n) as f64) * z[k])
            .collect()
    };

    let mut residual = y.y.clone();
    let mut residual_norms = vec![norm2(&residual)];
    let mut support: Vec<usize> = Vec::new();
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    // r_mat[j][i] = <q_i, a_j>, upper triangular
    let mut r_mat: Vec<Vec<Complex64>> = Vec::new();
    let mut in_support = vec![false; n * n];
    let mut scatter = ComplexGrid::zeros(n);

    while support.len() < opts.sparsity {
        let rn = *residual_norms.last().unwrap();
        if rn == 0.0 || (!support.is_empty() && rn * rn <= opts.residual_floor) {
            break;
        }
        for (s, r) in coords.iter().zip(&residual) {
            scatter[(s.r, s.c)] = *r;
        }
        let corr = idft2(&scatter)?;
        let mut best = None;
        let mut best_v = 0.0;
        for (k, v) in corr.as_slice().iter().enumerate() {
            let score = v.norm_sqr() * z[k].norm_sqr();
            if !in_support[k] && score > best_v {
                best_v = score;
                best = Some(k);
            }
        }
        let Some(k) = best else { break };

        let a = atom(k);
        let mut v = a.clone();
        let mut coeffs = Vec::with_capacity(q.len() + 1);
        for qi in &q {
            coeffs.push(dot_h(qi, &v));
        }
        for (qi, c) in q.iter().zip(&coeffs) {
            for (vj, qj) in v.iter_mut().zip(qi) {
                *vj -= qj * c;
            }
        }
        // second Gram-Schmidt pass
        for (i, qi) in q.iter().enumerate() {
            let c = dot_h(qi, &v);
            coeffs[i] += c;
            for (vj, qj) in v.iter_mut().zip(qi) {
                *vj -= qj * c;
            }
        }
        let vn = norm2(&v);
        if vn <= 1e-12 * norm2(&a) {
            // numerically dependent atom; nothing new to explain
            in_support[k] = true;
            continue;
        }
        for vj in &mut v {
            *vj /= vn;
        }
        coeffs.push(Complex64::new(vn, 0.0));
        let proj = dot_h(&v, &residual);
        for (rj, vj) in residual.iter_mut().zip(&v) {
            *rj -= vj * proj;
        }
        q.push(v);
        r_mat.push(coeffs);
        support.push(k);
        in_support[k] = true;
        residual_norms.push(norm2(&residual));
    }

    // Back-substitution R x = Q^H y.
    let s = support.len();
    let rhs: Vec<Complex64> = q.iter().map(|qi| dot_h(qi, &y.y)).collect();
    let mut x = vec![Complex64::new(0.0, 0.0); s];
    for i in (0..s).rev() {
        let mut acc = rhs[i];
        for j in i + 1..s {
            acc -= r_mat[j][i] * x[j];
        }
        x[i] = acc / r_mat[i][i];
    }
    let mut x_hat = ComplexGrid::zeros(n);
    for (&k, &v) in support.iter().zip(&x) {
        x_hat.as_mut_slice()[k] = v;
    }
    Ok(Recovery {
        x_hat,
        support: support.into_iter().map(FlatIndex).collect(),
        residual_norms,
    })
}

/// Strongest recovered direction, ties toward the lowest index.
pub fn estimate_best_beam(x_hat: &ComplexGrid) -> Result<FlatIndex> {
    if x_hat.as_slice().iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(invalid("beamspace estimate is identically zero"));
    }
    Ok(x_hat.argmax_abs())
}

/// Base matrix whose realized mask magnitude approximates `target`
/// (`||target||_2 = n`), via phase retrieval. Returns the final residual too.
pub fn base_from_mask<R: Rng + ?Sized>(
    target: &[f64],
    iterations: usize,
    rng: &mut R,
) -> Result<(BaseMatrix, f64)> {
    let out = gerchberg_saxton(target, iterations, rng)?;
    let res = out.final_residual();
    Ok((out.base, res))
}
