//! Square complex grids and the 2D transforms the sensing model is built on.
//!
//! Conventions used throughout the crate:
//!
//! * entries are stored row-major, flat index `k = r * n + c`; rows index
//!   elevation, columns index azimuth;
//! * `dft2(A) = U A U` with `U(j, k) = exp(-2 pi i j k / n) / sqrt(n)`, and
//!   `idft2(A) = U* A U*`, so both are exactly unitary;
//! * the inner product is `<A, B> = sum A .* conj(B)`;
//! * `circ_conv2(A, B)(i, j) = sum_{a, b} A(a, b) B(i - a, j - b)` with indices
//!   taken modulo `n`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Add, Index, IndexMut};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};

/// Flat beam/antenna index, row-major over an `n x n` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlatIndex(pub usize);

impl FlatIndex {
    pub fn from_rc(r: usize, c: usize, n: usize) -> Self {
        FlatIndex(r * n + c)
    }

    pub fn to_rc(self, n: usize) -> (usize, usize) {
        (self.0 / n, self.0 % n)
    }
}

/// A 2D circulant shift, both components reduced modulo `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShiftCoord {
    pub r: usize,
    pub c: usize,
}

impl ShiftCoord {
    pub fn new(r: i64, c: i64, n: usize) -> Self {
        let n = n as i64;
        ShiftCoord {
            r: r.rem_euclid(n) as usize,
            c: c.rem_euclid(n) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, Complex64::new(0.0, 0.0))
    }

    pub fn filled(n: usize, value: Complex64) -> Self {
        ComplexGrid {
            rows: n,
            cols: n,
            data: vec![value; n * n],
        }
    }

    /// Grid with a single `value` at `(r, c)` and zeros elsewhere.
    pub fn delta(n: usize, r: usize, c: usize, value: Complex64) -> Self {
        let mut g = Self::zeros(n);
        g[(r, c)] = value;
        g
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        ComplexGrid { rows: n, cols: n, data }
    }

    /// General constructor; rectangular shapes are accepted but most
    /// operations require a square grid.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("grid sides must be positive"));
        }
        if data.len() != rows * cols {
            return Err(dim(format!(
                "{} entries for a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(ComplexGrid { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square grid.
    pub fn n(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn side(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(dim(format!("expected square grid, got {}x{}", self.rows, self.cols)))
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, k: FlatIndex) -> Complex64 {
        self.data[k.0]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        ComplexGrid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(ComplexGrid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// `<self, other> = sum self .* conj(other)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entrywise l1 norm `sum |a_ij|`.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Row-major vectorization, consistent with [`FlatIndex`].
    pub fn vec(&self) -> Vec<Complex64> {
        self.data.clone()
    }

    pub fn unvec(n: usize, v: &[Complex64]) -> Result<Self> {
        Self::from_vec(n, n, v.to_vec())
    }

    /// Index of the largest-magnitude entry, ties toward the lowest index.
    pub fn argmax_abs(&self) -> FlatIndex {
        FlatIndex(argmax_lowest(self.data.iter().map(|z| z.norm_sqr())))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(dim(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexGrid {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexGrid {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexGrid {
    type Output = ComplexGrid;

    fn add(self, rhs: &ComplexGrid) -> ComplexGrid {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexGrid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

/// First index of the maximum; NaN never wins.
pub(crate) fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

type Plan = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plan>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize) -> Plan {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry(n)
            .or_insert_with(|| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)))
            .clone()
    })
}

fn transform2(a: &ComplexGrid, inverse: bool) -> Result<ComplexGrid> {
    let n = a.side()?;
    if n < 2 {
        return Err(invalid("2D-DFT needs side >= 2"));
    }
    let (fwd, inv) = plan(n);
    let fft = if inverse { inv } else { fwd };
    let mut out = a.data.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // rows
    fft.process_with_scratch(&mut out, &mut scratch);
    // columns via transpose
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(&out, &mut t, n);
    fft.process_with_scratch(&mut t, &mut scratch);
    transpose(&t, &mut out, n);
    let s = 1.0 / n as f64;
    for z in &mut out {
        *z *= s;
    }
    Ok(ComplexGrid { rows: n, cols: n, data: out })
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            dst[c * n + r] = src[r * n + c];
        }
    }
}

/// Unitary 2D-DFT, `U A U`.
pub fn dft2(a: &ComplexGrid) -> Result<ComplexGrid> {
    transform2(a, false)
}

/// Unitary inverse 2D-DFT, `U* A U*`.
pub fn idft2(a: &ComplexGrid) -> Result<ComplexGrid> {
    transform2(a, true)
}

/// `out(i, j) = a((i - r) mod n, (j - c) mod n)`.
pub fn circ_shift(a: &ComplexGrid, s: ShiftCoord) -> Result<ComplexGrid> {
    let n = a.side()?;
    let (r, c) = (s.r % n, s.c % n);
    Ok(ComplexGrid::from_fn(n, |i, j| a[((i + n - r) % n, (j + n - c) % n)]))
}

/// `P_FC(k, l) = conj(P((n - k) mod n, (n - l) mod n))`.
pub fn flip_conjugate(p: &ComplexGrid) -> Result<ComplexGrid> {
    let n = p.side()?;
    Ok(ComplexGrid::from_fn(n, |k, l| p[((n - k) % n, (n - l) % n)].conj()))
}

/// 2D circular convolution through the transform domain:
/// `a * b = n * dft2(idft2(a) .* idft2(b))`.
pub fn circ_conv2(a: &ComplexGrid, b: &ComplexGrid) -> Result<ComplexGrid> {
    let n = a.side()?;
    if b.side()? != n {
        return Err(dim(format!("convolution of {n}x{n} with {0}x{0}", b.n())));
    }
    let prod = idft2(a)?.hadamard(&idft2(b)?)?;
    Ok(dft2(&prod)?.scale(n as f64))
}

/// Half-wavelength Vandermonde response `a[m] = exp(i pi m delta)`.
pub fn array_response(n: usize, delta: f64) -> Vec<Complex64> {
    (0..n)
        .map(|m| Complex64::from_polar(1.0, std::f64::consts::PI * m as f64 * delta))
        .collect()
}

/// Outer product `u v^T` as a grid.
pub fn outer(u: &[Complex64], v: &[Complex64]) -> ComplexGrid {
    assert_eq!(u.len(), v.len());
    ComplexGrid::from_fn(u.len(), |r, c| u[r] * v[c])
}
