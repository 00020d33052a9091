//! Online AoD-prior learning from best-beam feedback.
//!
//! Each compressive estimate plays every direction at once (a superarm): the
//! chosen direction earns reward 1, all others reward 0, and every play count
//! advances. Means are kept as exact win counts.

use std::str::FromStr;

use serde::Serialize;

use crate::beamforming::{bf_loss_db, ccs_align, perfect_gain};
use crate::ccs::{BaseMatrix, Mask, OmpOptions, DEFAULT_SPARSITY};
use crate::channel::Ensemble;
use crate::error::{invalid, Result};
use crate::grid::{argmax_lowest, FlatIndex};
use crate::gs::{gerchberg_saxton, DEFAULT_GS_ITERATIONS};
use crate::mask::{optimize_mask_power, DEFAULT_POWER_FLOOR};
use crate::prior::{hellinger, AoDPrior};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreConfig {
    /// Exploration coefficient `sqrt(2 log(1/delta))`.
    pub c: f64,
    /// Index of a never-played direction.
    pub n_inf: f64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig { c: 0.1, n_inf: 10000.0 }
    }
}

impl ExploreConfig {
    pub fn new(c: f64, n_inf: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid(format!("exploration coefficient must be >= 0, got {c}")));
        }
        if !(n_inf > 0.0 && n_inf.is_finite()) {
            return Err(invalid("sentinel must be positive"));
        }
        Ok(ExploreConfig { c, n_inf })
    }

    /// From a confidence level `delta` in `(0, 1)`.
    pub fn from_delta(delta: f64, n_inf: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        Self::new((2.0 * (1.0 / delta).ln()).sqrt(), n_inf)
    }

    /// Exploration addend for a direction played `plays` times.
    pub fn bonus(&self, plays: u64) -> f64 {
        if plays == 0 {
            self.n_inf
        } else {
            self.c / (plays as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LearnerState {
    t: u64,
    plays: Vec<u64>,
    wins: Vec<u64>,
}

impl LearnerState {
    pub fn new(len: usize) -> Self {
        LearnerState {
            t: 0,
            plays: vec![0; len],
            wins: vec![0; len],
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn plays(&self) -> &[u64] {
        &self.plays
    }

    pub fn wins(&self) -> &[u64] {
        &self.wins
    }

    /// Empirical means `wins_k / T_k` (0 for unplayed directions).
    pub fn mu(&self) -> Vec<f64> {
        self.plays
            .iter()
            .zip(&self.wins)
            .map(|(&t, &w)| if t == 0 { 0.0 } else { w as f64 / t as f64 })
            .collect()
    }

    /// Means normalized to a prior; uniform before any reward.
    pub fn mean_prior(&self) -> AoDPrior {
        if self.wins.iter().all(|&w| w == 0) {
            return AoDPrior::uniform(self.len());
        }
        AoDPrior::from_counts(&self.wins).expect("some wins")
    }

    /// Superarm update: `s` earns 1, every other direction 0, all `T_k` advance.
    pub fn record_reward(&mut self, s: FlatIndex) -> Result<()> {
        if s.0 >= self.len() {
            return Err(invalid(format!("direction {} out of range", s.0)));
        }
        self.wins[s.0] += 1;
        for t in &mut self.plays {
            *t += 1;
        }
        self.t += 1;
        Ok(())
    }
}

/// `N_inf` for unplayed directions, else `mu_k + c / sqrt(T_k)`.
pub fn ucb_index(state: &LearnerState, cfg: &ExploreConfig) -> Vec<f64> {
    state
        .mu()
        .iter()
        .zip(state.plays())
        .map(|(&m, &t)| if t == 0 { cfg.n_inf } else { m + cfg.bonus(t) })
        .collect()
}

/// Normalized UCB indices.
pub fn ucb_prior(state: &LearnerState, cfg: &ExploreConfig) -> AoDPrior {
    AoDPrior::from_weights(&ucb_index(state, cfg)).expect("indices are finite and nonnegative")
}

/// Mask amplitudes from the normalized means, widened by the exploration
/// addend and rescaled to `||z||_2 = n`.
///
/// The addend is applied to the unit-norm amplitudes, so `c` keeps the same
/// meaning for every array size.
pub fn regularized_mask(state: &LearnerState, cfg: &ExploreConfig, sigma2: f64, floor: f64) -> Result<Vec<f64>> {
    let prior = state.mean_prior();
    let n = prior.side()?;
    let power = optimize_mask_power(&prior, sigma2, floor)?;
    let inv_n = 1.0 / n as f64;
    let mut amp: Vec<f64> = power
        .amplitudes()
        .iter()
        .zip(state.plays())
        .map(|(a, &t)| a * inv_n + cfg.bonus(t))
        .collect();
    let norm = amp.iter().map(|a| a * a).sum::<f64>().sqrt();
    for a in &mut amp {
        *a *= n as f64 / norm;
    }
    Ok(amp)
}

/// `M(t) = max(M0 - floor(t / dT) * dM, Mmin)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementSchedule {
    pub m0: usize,
    pub dm: usize,
    pub dt: usize,
    pub m_min: usize,
}

impl MeasurementSchedule {
    pub fn new(m0: usize, dm: usize, dt: usize, m_min: usize) -> Result<Self> {
        if m0 == 0 || dt == 0 || m_min == 0 {
            return Err(invalid("M0, dT and Mmin must be positive"));
        }
        if m_min > m0 {
            return Err(invalid(format!("Mmin = {m_min} exceeds M0 = {m0}")));
        }
        Ok(MeasurementSchedule { m0, dm, dt, m_min })
    }

    pub fn fixed(m: usize) -> Result<Self> {
        Self::new(m, 0, 1, m)
    }

    pub fn at(&self, t: usize) -> usize {
        let drop = (t / self.dt).saturating_mul(self.dm);
        self.m0.saturating_sub(drop).max(self.m_min)
    }
}

impl FromStr for MeasurementSchedule {
    type Err = crate::Error;

    /// `M0,dM,dT,Mmin`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(invalid(format!("schedule `{s}`: expected M0,dM,dT,Mmin")));
        }
        let mut v = [0usize; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| invalid(format!("schedule `{s}`: `{p}` is not a nonnegative integer")))?;
        }
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl std::fmt::Display for MeasurementSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.m0, self.dm, self.dt, self.m_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    /// Mask optimized for the normalized UCB indices.
    Ucb,
    /// Mask optimized for the normalized means, then widened by exploration.
    RegMask,
    /// [`LearnerKind::Ucb`] with the exploration term removed.
    NoExplore,
    /// Fed the true best beam; reference curve for the learned prior.
    Oracle,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Ucb => "ucb",
            LearnerKind::RegMask => "regmask",
            LearnerKind::NoExplore => "noexplore",
            LearnerKind::Oracle => "oracle",
        }
    }
}

impl FromStr for LearnerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ucb" => Ok(LearnerKind::Ucb),
            "regmask" => Ok(LearnerKind::RegMask),
            "noexplore" => Ok(LearnerKind::NoExplore),
            "oracle" => Ok(LearnerKind::Oracle),
            _ => Err(invalid(format!("unknown learner `{s}` (ucb, regmask, noexplore, oracle)"))),
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub kind: LearnerKind,
    pub explore: ExploreConfig,
    pub schedule: MeasurementSchedule,
    pub sparsity: usize,
    pub gs_iterations: usize,
    pub power_floor: f64,
    /// Noise variance handed to the mask optimizer; `None` uses the
    /// ensemble's calibrated variance.
    pub mask_sigma2: Option<f64>,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn new(kind: LearnerKind, schedule: MeasurementSchedule, seed: u64) -> Self {
        EpisodeConfig {
            kind,
            explore: ExploreConfig::default(),
            schedule,
            sparsity: DEFAULT_SPARSITY,
            gs_iterations: DEFAULT_GS_ITERATIONS,
            power_floor: DEFAULT_POWER_FLOOR,
            mask_sigma2: None,
            seed,
        }
    }
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub s: usize,
    pub hellinger: f64,
    pub bf_loss_db: f64,
    pub prior_entropy: f64,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub steps: Vec<StepRecord>,
    pub state: LearnerState,
    /// Prior of the true best beams over the whole episode.
    pub truth: AoDPrior,
    /// Optional mask amplitude snapshots `(t, |z|)`.
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

impl Episode {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("plain record"));
            out.push('\n');
        }
        out
    }
}

/// Hellinger distance of the normalized win counts from `truth`; the oracle
/// learner's curve under this measure is the perfect-feedback reference.
pub fn learned_hellinger(state: &LearnerState, truth: &AoDPrior) -> Result<f64> {
    hellinger(&state.mean_prior(), truth)
}

/// Runs one learner over the realizations of `ensemble` in order, taking a
/// mask snapshot every `snapshot_every` steps (0 disables).
pub fn run_episode(ensemble: &Ensemble, cfg: &EpisodeConfig, snapshot_every: usize) -> Result<Episode> {
    let truth = ensemble.prior()?;
    let len = truth.len();
    truth.side()?;
    let sigma2 = ensemble.sigma2;
    let mask_sigma2 = cfg.mask_sigma2.unwrap_or(sigma2);
    if !(mask_sigma2 > 0.0) {
        return Err(invalid("mask noise variance must be positive"));
    }
    let opts = OmpOptions {
        sparsity: cfg.sparsity,
        residual_floor: 0.0,
    };
    let no_explore = ExploreConfig { c: 0.0, ..cfg.explore };
    let mut state = LearnerState::new(len);
    let mut steps = Vec::with_capacity(ensemble.len());
    let mut snapshots = Vec::new();

    for (t, real) in ensemble.realizations.iter().enumerate() {
        let m = cfg.schedule.at(t).min(len);
        let perfect = perfect_gain(&real.h)?;
        let (s, gain, design_prior, amps) = if cfg.kind == LearnerKind::Oracle {
            let p = state.mean_prior();
            (real.true_best, perfect, p, None)
        } else {
            let (prior, amps) = match cfg.kind {
                LearnerKind::RegMask => {
                    let amps = regularized_mask(&state, &cfg.explore, mask_sigma2, cfg.power_floor)?;
                    (state.mean_prior(), amps)
                }
                _ => {
                    let ex = if cfg.kind == LearnerKind::NoExplore { &no_explore } else { &cfg.explore };
                    let prior = ucb_prior(&state, ex);
                    let amps = optimize_mask_power(&prior, mask_sigma2, cfg.power_floor)?.amplitudes();
                    (prior, amps)
                }
            };
            let mut phase_rng = stream(cfg.seed, Domain::PhaseInit, t as u64);
            let gs = gerchberg_saxton(&amps, cfg.gs_iterations, &mut phase_rng)?;
            let base: BaseMatrix = gs.base;
            let mask: Mask = base.mask();
            let mut samp = stream(cfg.seed, Domain::Sampling, t as u64);
            let mut noise = stream(cfg.seed, Domain::Noise, t as u64);
            let opts = OmpOptions {
                residual_floor: m as f64 * sigma2,
                ..opts
            };
            let out = ccs_align(&real.h, &base, &mask, m, sigma2, &opts, &mut samp, &mut noise)?;
            // An all-zero estimate falls back to the most energized direction.
            let s = out
                .chosen
                .unwrap_or(FlatIndex(argmax_lowest(amps.iter().copied())));
            (s, out.gain, prior, Some(amps))
        };
        state.record_reward(s)?;
        if snapshot_every > 0 && t % snapshot_every == 0 {
            if let Some(a) = &amps {
                snapshots.push((t, a.clone()));
            }
        }
        steps.push(StepRecord {
            t,
            m,
            s: s.0,
            hellinger: learned_hellinger(&state, &truth)?,
            bf_loss_db: bf_loss_db(gain, perfect),
            prior_entropy: design_prior.entropy(),
        });
    }
    Ok(Episode {
        steps,
        state,
        truth,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucb_examples() {
        let cfg = ExploreConfig::default();
        let fresh = LearnerState::new(4);
        assert_eq!(ucb_index(&fresh, &cfg), vec![10000.0; 4]);
        assert_eq!(ucb_prior(&fresh, &cfg), AoDPrior::uniform(4));

        let mut st = LearnerState::new(4);
        st.record_reward(FlatIndex(0)).unwrap();
        let idx = ucb_index(&st, &cfg);
        assert!((idx[0] - 1.1).abs() < 1e-15 && (idx[1] - 0.1).abs() < 1e-15);
        let p = ucb_prior(&st, &cfg);
        assert!((p.probs()[0] - 1.1 / 1.4).abs() < 1e-15);
        assert!((p.probs()[3] - 0.1 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn reward_bookkeeping() {
        let mut st = LearnerState::new(4);
        st.record_reward(FlatIndex(2)).unwrap();
        assert_eq!(st.mu(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(st.plays(), &[1, 1, 1, 1]);
        st.record_reward(FlatIndex(2)).unwrap();
        assert_eq!(st.mu()[2], 1.0);
        st.record_reward(FlatIndex(0)).unwrap();
        st.record_reward(FlatIndex(1)).unwrap();
        assert_eq!(st.mu(), vec![0.25, 0.25, 0.5, 0.0]);
        assert!(st.record_reward(FlatIndex(4)).is_err());
    }

    #[test]
    fn delta_conversion() {
        let c = ExploreConfig::from_delta((-0.005f64).exp(), 1e4).unwrap();
        assert!((c.c - 0.1).abs() < 1e-12);
        assert!(ExploreConfig::from_delta(1.0, 1e4).is_err());
        assert!(ExploreConfig::new(-0.1, 1e4).is_err());
    }

    #[test]
    fn regularized_mask_cases() {
        let cfg = ExploreConfig::default();
        let fresh = LearnerState::new(16);
        let a = regularized_mask(&fresh, &cfg, 0.1, 0.01).unwrap();
        for v in &a {
            assert!((v - 1.0).abs() < 1e-9);
        }

        let mut st = LearnerState::new(16);
        for k in [3, 3, 3, 5, 5, 7] {
            st.record_reward(FlatIndex(k)).unwrap();
        }
        let zero = ExploreConfig { c: 0.0, ..cfg };
        let a = regularized_mask(&st, &zero, 0.1, 0.01).unwrap();
        let want = optimize_mask_power(&st.mean_prior(), 0.1, 0.01).unwrap().amplitudes();
        for (x, y) in a.iter().zip(&want) {
            assert!((x - y).abs() < 1e-9);
        }
        let a = regularized_mask(&st, &cfg, 0.1, 0.01).unwrap();
        assert!((a.iter().map(|v| v * v).sum::<f64>() - 16.0).abs() < 1e-9);
        assert!(a[3] >= a[5] && a[5] >= a[7] && a[7] >= a[0]);
        assert!(a.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn schedule_values() {
        let s = MeasurementSchedule::new(300, 20, 100, 25).unwrap();
        assert_eq!(s.at(0), 300);
        assert_eq!(s.at(250), 260);
        assert_eq!(s.at(5000), 25);
        assert_eq!("300,20,100,25".parse::<MeasurementSchedule>().unwrap(), s);
        assert_eq!(s.to_string(), "300,20,100,25");
        assert!("300,20,100".parse::<MeasurementSchedule>().is_err());
        assert!(MeasurementSchedule::new(10, 1, 1, 20).is_err());
        assert_eq!(MeasurementSchedule::fixed(50).unwrap().at(123456), 50);
    }

    #[test]
    fn kinds_parse() {
        for k in ["ucb", "regmask", "noexplore", "oracle"] {
            assert_eq!(k.parse::<LearnerKind>().unwrap().name(), k);
        }
        assert!("greedy".parse::<LearnerKind>().is_err());
    }
}
