//! Alignment-probability model and prior-driven mask power allocation.
//!
//! Under a one-sparse beamspace with unit coefficient, full sampling and a
//! mask with per-direction power `s_k = |z_k|^2`, the decoder
//! `argmax_k |x_k z_k + v_k|` succeeds with probability
//!
//! ```text
//! P(s) = sum_k p_k (1 - exp(-s_k / (2 sigma^2)) / 2)^(n^2 - 1)
//! ```
//!
//! The allocator maximizes the concave Jensen bound
//! `sum_k p_k g(s_k)`, `g(s) = ln(1 - exp(-s / (2 sigma^2)) / 2)`, subject to
//! `sum_k s_k = n^2` and `s_k >= floor`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::prior::AoDPrior;

/// Default per-direction power floor; keeps the mask nonzero everywhere.
pub const DEFAULT_POWER_FLOOR: f64 = 0.01;

/// Per-direction mask power `|z_k|^2`, summing to `n^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPower {
    s: Vec<f64>,
}

impl MaskPower {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        let n2 = s.len() as f64;
        if s.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(invalid("mask power must be finite and nonnegative"));
        }
        let sum: f64 = s.iter().sum();
        if (sum - n2).abs() > 1e-6 * n2.max(1.0) {
            return Err(invalid(format!("mask power sums to {sum}, expected {n2}")));
        }
        Ok(MaskPower { s })
    }

    /// Unimodular mask: unit power in every direction.
    pub fn uniform(len: usize) -> Self {
        MaskPower { s: vec![1.0; len] }
    }

    pub fn powers(&self) -> &[f64] {
        &self.s
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.s.iter().map(|v| v.sqrt()).collect()
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// `P(|1 + x|^2 >= |y|^2)` for `x, y` iid circular complex Gaussian of variance `xi2`.
pub fn pairwise_detection_prob(xi2: f64) -> Result<f64> {
    if !(xi2 > 0.0) {
        return Err(invalid(format!("variance must be positive, got {xi2}")));
    }
    Ok(1.0 - 0.5 * (-1.0 / (2.0 * xi2)).exp())
}

fn per_direction(s: f64, sigma2: f64) -> f64 {
    // ln(1 - e^{-s/2sigma^2}/2), accurate when the exponential is tiny
    (-0.5 * (-s / (2.0 * sigma2)).exp()).ln_1p()
}

fn check_inputs(s: &MaskPower, p: &AoDPrior, sigma2: f64) -> Result<()> {
    if s.len() != p.len() {
        return Err(invalid(format!("mask length {} vs prior length {}", s.len(), p.len())));
    }
    if !(sigma2 > 0.0) {
        return Err(invalid("noise variance must be positive"));
    }
    Ok(())
}

/// Closed-form alignment probability of a mask under a prior.
pub fn success_prob(s: &MaskPower, p: &AoDPrior, sigma2: f64) -> Result<f64> {
    check_inputs(s, p, sigma2)?;
    let m = (p.len() - 1) as f64;
    Ok(p.probs()
        .iter()
        .zip(s.powers())
        .map(|(&pk, &sk)| pk * (m * per_direction(sk, sigma2)).exp())
        .sum())
}

/// Jensen lower bound on `ln success_prob`.
pub fn lower_bound(s: &MaskPower, p: &AoDPrior, sigma2: f64) -> Result<f64> {
    check_inputs(s, p, sigma2)?;
    let m = (p.len() - 1) as f64;
    Ok(m * bound_objective(s.powers(), p.probs(), sigma2))
}

/// `sum_k p_k g(s_k)`, the quantity the allocator maximizes.
pub fn bound_objective(s: &[f64], p: &[f64], sigma2: f64) -> f64 {
    p.iter()
        .zip(s)
        .map(|(&pk, &sk)| if pk > 0.0 { pk * per_direction(sk, sigma2) } else { 0.0 })
        .sum()
}

fn softplus(a: f64) -> f64 {
    if a > 30.0 {
        a + (-a).exp()
    } else {
        a.exp().ln_1p()
    }
}

/// Power that satisfies `p g'(s) = exp(log_lambda)`, clamped at `floor`.
///
/// `g'(s) = 1 / (2 sigma^2 (2 e^{s / 2 sigma^2} - 1))` inverts in closed form;
/// it is evaluated in log space so tiny multipliers do not underflow.
fn power_at(pk: f64, log_lambda: f64, sigma2: f64, floor: f64) -> f64 {
    if pk <= 0.0 {
        return floor;
    }
    let a = (pk / (2.0 * sigma2)).ln() - log_lambda;
    let s = 2.0 * sigma2 * (softplus(a) - std::f64::consts::LN_2);
    s.max(floor)
}

/// KKT-optimal power allocation for the Jensen bound.
///
/// Outer bisection on the log of the budget multiplier; the per-direction
/// stationarity condition is inverted exactly.
pub fn optimize_mask_power(p: &AoDPrior, sigma2: f64, floor: f64) -> Result<MaskPower> {
    if !(sigma2 > 0.0) {
        return Err(invalid("noise variance must be positive"));
    }
    if !(floor >= 0.0) || floor > 1.0 {
        return Err(invalid(format!(
            "power floor {floor} infeasible for budget n^2 over n^2 directions"
        )));
    }
    let len = p.len();
    let budget = len as f64;
    if floor == 1.0 {
        return Ok(MaskPower::uniform(len));
    }
    let probs = p.probs();
    let total = |ll: f64| -> f64 { probs.iter().map(|&pk| power_at(pk, ll, sigma2, floor)).sum() };

    // Upper end: multiplier at which every direction sits on the floor.
    let pmax = probs.iter().cloned().fold(0.0, f64::max);
    let gprime_floor = 1.0 / (2.0 * sigma2 * (2.0 * (floor / (2.0 * sigma2)).exp() - 1.0));
    let mut hi = (pmax * gprime_floor).ln();
    if !hi.is_finite() {
        hi = (pmax / (2.0 * sigma2)).ln();
    }
    let mut width = 1.0;
    let mut lo = hi - width;
    while total(lo) < budget {
        width *= 2.0;
        lo = hi - width;
    }

    // log-multiplier to ~1e-12 (relative 1e-12 on the multiplier itself)
    let tol = 1e-10 * budget;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let t = total(mid);
        if t > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if (t - budget).abs() <= tol || hi - lo <= 1e-12 {
            break;
        }
    }
    let ll = 0.5 * (lo + hi);
    let mut s: Vec<f64> = probs.iter().map(|&pk| power_at(pk, ll, sigma2, floor)).collect();

    // Spread the last rounding residue over the active set.
    let active: Vec<usize> = (0..len).filter(|&k| s[k] > floor).collect();
    let resid = budget - s.iter().sum::<f64>();
    if !active.is_empty() {
        let share = resid / active.len() as f64;
        for &k in &active {
            s[k] += share;
        }
    }
    MaskPower::new(s)
}
