//! Probability vectors over the `n^2` beamspace directions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{argmax_lowest, FlatIndex};

const SUM_TOL: f64 = 1e-9;

/// AoD prior: probability that each 2D-DFT direction is the strongest one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoDPrior {
    p: Vec<f64>,
}

impl AoDPrior {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(invalid("empty prior"));
        }
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(invalid("prior entries must be finite and nonnegative"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("prior sums to {sum}, expected 1")));
        }
        Ok(AoDPrior { p })
    }

    pub fn uniform(len: usize) -> Self {
        AoDPrior {
            p: vec![1.0 / len as f64; len],
        }
    }

    pub fn one_hot(len: usize, k: usize) -> Self {
        let mut p = vec![0.0; len];
        p[k] = 1.0;
        AoDPrior { p }
    }

    /// Normalizes nonnegative weights; all-zero weights give the uniform prior.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let sum: f64 = w.iter().sum();
        if sum == 0.0 {
            return Ok(Self::uniform(w.len()));
        }
        Ok(AoDPrior {
            p: w.iter().map(|v| v / sum).collect(),
        })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(invalid("no observations"));
        }
        Ok(AoDPrior {
            p: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Side `n` of the beam grid this prior lives on.
    pub fn side(&self) -> Result<usize> {
        let n = (self.p.len() as f64).sqrt().round() as usize;
        if n * n != self.p.len() {
            return Err(invalid(format!("prior length {} is not a square", self.p.len())));
        }
        Ok(n)
    }

    pub fn argmax(&self) -> FlatIndex {
        FlatIndex(argmax_lowest(self.p.iter().copied()))
    }

    /// Directions sorted by descending probability, ties toward lower index.
    pub fn ranked(&self) -> Vec<FlatIndex> {
        let mut idx: Vec<usize> = (0..self.p.len()).collect();
        idx.sort_by(|&a, &b| self.p[b].total_cmp(&self.p[a]).then(a.cmp(&b)));
        idx.into_iter().map(FlatIndex).collect()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .p
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    }
}

/// Hellinger distance `(1/sqrt 2) * || sqrt p - sqrt q ||_2`, in `[0, 1]`.
pub fn hellinger(p: &AoDPrior, q: &AoDPrior) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid(format!("priors of length {} and {}", p.len(), q.len())));
    }
    let s: f64 = p
        .p
        .iter()
        .zip(&q.p)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((s / 2.0).sqrt().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(AoDPrior::new(vec![0.5, 0.5]).is_ok());
        assert!(AoDPrior::new(vec![0.5, 0.6]).is_err());
        assert!(AoDPrior::new(vec![1.5, -0.5]).is_err());
        assert!(AoDPrior::new(vec![]).is_err());
        assert_eq!(AoDPrior::from_weights(&[0.0, 0.0]).unwrap(), AoDPrior::uniform(2));
        assert_eq!(AoDPrior::uniform(16).side().unwrap(), 4);
        assert!(AoDPrior::uniform(15).side().is_err());
    }

    #[test]
    fn hellinger_examples() {
        let p = AoDPrior::new(vec![0.5, 0.5]).unwrap();
        let q = AoDPrior::one_hot(2, 0);
        assert_eq!(hellinger(&p, &p).unwrap(), 0.0);
        assert!((hellinger(&AoDPrior::one_hot(2, 0), &AoDPrior::one_hot(2, 1)).unwrap() - 1.0).abs() < 1e-15);
        let expect = (1.0 - 1.0 / 2f64.sqrt()).sqrt();
        assert!((hellinger(&p, &q).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.5412).abs() < 1e-4);
        assert!((hellinger(&q, &p).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn ranking_ties_low() {
        let p = AoDPrior::new(vec![0.2, 0.3, 0.2, 0.3]).unwrap();
        assert_eq!(p.ranked(), vec![FlatIndex(1), FlatIndex(3), FlatIndex(0), FlatIndex(2)]);
        assert_eq!(p.argmax(), FlatIndex(1));
    }
}
