//! Synthetic two-lane street-canyon channels.
//!
//! The base station sits at the origin at height `bs_height`, with its
//! `n x n` planar array in the x-z plane facing +y. Rows of `H` follow the
//! vertical axis (`a_N(cos theta)`) and columns the horizontal one
//! (`a_N(sin theta cos phi)`). Receivers drive along x in one of two lanes.
//! Paths are the line of sight (unless blocked) plus image-method bounces off
//! the far building wall and the ground.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::config::KvConfig;
use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::grid::{array_response, idft2, outer, ComplexGrid, FlatIndex};
use crate::prior::AoDPrior;
use crate::rng::{stream, Domain};

/// Longitudinal receiver placement along the coverage segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PositionLaw {
    Uniform,
    /// Erlang-distributed gaps (shape `k`, scale `theta` meters) from the
    /// segment start, wrapped onto the segment.
    Erlang { k: u32, theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub max_paths: usize,
    pub bs_height: f64,
    pub rx_height: f64,
    /// Distance from the array wall to the near edge of the first lane.
    pub road_offset: f64,
    pub lane_width: f64,
    /// The far wall stands at `y = 2 * canyon_half_width`.
    pub canyon_half_width: f64,
    pub coverage_length: f64,
    pub reflection_loss_db: f64,
    pub blockage_prob: f64,
    pub wall_reflections: bool,
    pub ground_reflections: bool,
    pub position_law: PositionLaw,
    /// `0` for narrowband; otherwise paths are binned into this many delay
    /// taps of `tap_spacing_m` and the taps summed.
    pub wideband_taps: usize,
    pub tap_spacing_m: f64,
    pub require_pow2: bool,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            n: 32,
            max_paths: 4,
            bs_height: 6.0,
            rx_height: 1.5,
            road_offset: 4.0,
            lane_width: 3.5,
            canyon_half_width: 8.0,
            coverage_length: 80.0,
            reflection_loss_db: 6.0,
            blockage_prob: 0.2,
            wall_reflections: true,
            ground_reflections: true,
            position_law: PositionLaw::Uniform,
            wideband_taps: 0,
            tap_spacing_m: 0.6,
            require_pow2: true,
            seed: 1,
        }
    }
}

impl Scenario {
    pub const KEYS: &'static [&'static str] = &[
        "n",
        "max_paths",
        "bs_height",
        "rx_height",
        "road_offset",
        "lane_width",
        "canyon_half_width",
        "coverage_length",
        "reflection_loss_db",
        "blockage_prob",
        "wall_reflections",
        "ground_reflections",
        "position_law",
        "erlang_k",
        "erlang_theta",
        "wideband_taps",
        "tap_spacing_m",
        "require_pow2",
        "seed",
    ];

    /// Applies the keys present in `cfg` on top of `self` and validates.
    pub fn apply(&mut self, cfg: &KvConfig) -> Result<()> {
        cfg.set("n", &mut self.n)?;
        cfg.set("max_paths", &mut self.max_paths)?;
        cfg.set("bs_height", &mut self.bs_height)?;
        cfg.set("rx_height", &mut self.rx_height)?;
        cfg.set("road_offset", &mut self.road_offset)?;
        cfg.set("lane_width", &mut self.lane_width)?;
        cfg.set("canyon_half_width", &mut self.canyon_half_width)?;
        cfg.set("coverage_length", &mut self.coverage_length)?;
        cfg.set("reflection_loss_db", &mut self.reflection_loss_db)?;
        cfg.set("blockage_prob", &mut self.blockage_prob)?;
        cfg.set("wall_reflections", &mut self.wall_reflections)?;
        cfg.set("ground_reflections", &mut self.ground_reflections)?;
        cfg.set("wideband_taps", &mut self.wideband_taps)?;
        cfg.set("tap_spacing_m", &mut self.tap_spacing_m)?;
        cfg.set("require_pow2", &mut self.require_pow2)?;
        cfg.set("seed", &mut self.seed)?;
        match cfg.raw("position_law") {
            None | Some("uniform") => {
                if cfg.raw("position_law").is_some() {
                    self.position_law = PositionLaw::Uniform;
                }
            }
            Some("erlang") => {
                let (mut k, mut theta) = match self.position_law {
                    PositionLaw::Erlang { k, theta } => (k, theta),
                    PositionLaw::Uniform => (2, 10.0),
                };
                cfg.set("erlang_k", &mut k)?;
                cfg.set("erlang_theta", &mut theta)?;
                self.position_law = PositionLaw::Erlang { k, theta };
            }
            Some(other) => {
                return Err(cfg.error("position_law", format!("expected uniform or erlang, got `{other}`")))
            }
        }
        self.check().map_err(|(key, msg)| cfg.error(key, msg))
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(key, msg)| invalid(format!("{key}: {msg}")))
    }

    /// First violated constraint as `(key, message)`.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.n < 2 {
            return Err(("n", "must be at least 2".into()));
        }
        if self.require_pow2 && !self.n.is_power_of_two() {
            return Err(("n", format!("{} is not a power of two (set require_pow2 = false)", self.n)));
        }
        if self.max_paths == 0 {
            return Err(("max_paths", "must be at least 1".into()));
        }
        for (name, v) in [
            ("bs_height", self.bs_height),
            ("rx_height", self.rx_height),
            ("road_offset", self.road_offset),
            ("lane_width", self.lane_width),
            ("canyon_half_width", self.canyon_half_width),
            ("coverage_length", self.coverage_length),
            ("tap_spacing_m", self.tap_spacing_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err((name, format!("must be positive, got {v}")));
            }
        }
        if !(self.reflection_loss_db >= 0.0 && self.reflection_loss_db.is_finite()) {
            return Err(("reflection_loss_db", "must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.blockage_prob) {
            return Err(("blockage_prob", format!("{} outside [0, 1]", self.blockage_prob)));
        }
        if 2.0 * self.canyon_half_width <= self.road_offset + 2.0 * self.lane_width {
            return Err(("canyon_half_width", "too small: lanes reach the far wall".into()));
        }
        if let PositionLaw::Erlang { k, theta } = self.position_law {
            if k == 0 {
                return Err(("erlang_k", "must be at least 1".into()));
            }
            if !(theta > 0.0) {
                return Err(("erlang_theta", "must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("n".to_string(), self.n.to_string()),
            ("max_paths".into(), self.max_paths.to_string()),
            ("bs_height".into(), self.bs_height.to_string()),
            ("rx_height".into(), self.rx_height.to_string()),
            ("road_offset".into(), self.road_offset.to_string()),
            ("lane_width".into(), self.lane_width.to_string()),
            ("canyon_half_width".into(), self.canyon_half_width.to_string()),
            ("coverage_length".into(), self.coverage_length.to_string()),
            ("reflection_loss_db".into(), self.reflection_loss_db.to_string()),
            ("blockage_prob".into(), self.blockage_prob.to_string()),
            ("wall_reflections".into(), self.wall_reflections.to_string()),
            ("ground_reflections".into(), self.ground_reflections.to_string()),
        ];
        match self.position_law {
            PositionLaw::Uniform => v.push(("position_law".into(), "uniform".into())),
            PositionLaw::Erlang { k, theta } => {
                v.push(("position_law".into(), "erlang".into()));
                v.push(("erlang_k".into(), k.to_string()));
                v.push(("erlang_theta".into(), theta.to_string()));
            }
        }
        v.push(("wideband_taps".into(), self.wideband_taps.to_string()));
        v.push(("tap_spacing_m".into(), self.tap_spacing_m.to_string()));
        v.push(("require_pow2".into(), self.require_pow2.to_string()));
        v.push(("seed".into(), self.seed.to_string()));
        v
    }

    fn far_wall(&self) -> f64 {
        2.0 * self.canyon_half_width
    }

    /// Lateral (y) position of the center of lane 0 or 1.
    pub fn lane_center(&self, lane: usize) -> f64 {
        self.road_offset + self.lane_width * (0.5 + lane as f64)
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Linear amplitude.
    pub gain: f64,
    /// Radians in `[0, 2 pi)`.
    pub phase: f64,
    /// Elevation from the vertical, in `(0, pi)`.
    pub theta: f64,
    /// Azimuth from the array's horizontal axis, in `(0, pi)`.
    pub phi: f64,
    /// Propagation distance in meters.
    pub length: f64,
}

impl PathParams {
    /// Departure direction of the ray from the array toward `d`.
    pub fn toward(d: [f64; 3], gain: f64, phase: f64) -> Self {
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        PathParams {
            gain,
            phase,
            theta: (d[2] / len).clamp(-1.0, 1.0).acos(),
            phi: d[1].atan2(d[0]),
            length: len,
        }
    }

    /// Spatial frequencies `(cos theta, sin theta cos phi)` for rows and columns.
    pub fn spatial_freqs(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin() * self.phi.cos())
    }
}

fn longitudinal<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> f64 {
    let len = s.coverage_length;
    let offset = match s.position_law {
        PositionLaw::Uniform => rng.random::<f64>() * len,
        PositionLaw::Erlang { k, theta } => {
            let g = Gamma::new(k as f64, theta).expect("validated erlang parameters");
            g.sample(rng).rem_euclid(len)
        }
    };
    offset - len / 2.0
}

/// Draws the paths of one receiver placement, strongest first.
pub fn sample_paths<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<Vec<PathParams>> {
    s.validate()?;
    let bounce = 10f64.powf(-s.reflection_loss_db / 20.0);
    loop {
        let x = longitudinal(s, rng);
        let lane = usize::from(rng.random_bool(0.5));
        let y = s.lane_center(lane);
        let blocked = rng.random_bool(s.blockage_prob);
        let dz = s.rx_height - s.bs_height;
        let mirrored_z = -s.rx_height - s.bs_height;
        let wall_y = 2.0 * s.far_wall() - y;

        let mut images: Vec<([f64; 3], i32)> = Vec::with_capacity(4);
        if !blocked {
            images.push(([x, y, dz], 0));
        }
        if s.wall_reflections {
            images.push(([x, wall_y, dz], 1));
        }
        if s.ground_reflections {
            images.push(([x, y, mirrored_z], 1));
        }
        if s.wall_reflections && s.ground_reflections {
            images.push(([x, wall_y, mirrored_z], 2));
        }
        if images.is_empty() {
            continue;
        }
        if images.iter().any(|(d, _)| d.iter().map(|v| v * v).sum::<f64>() < 1e-12) {
            continue;
        }
        let mut paths: Vec<PathParams> = images
            .into_iter()
            .map(|(d, bounces)| {
                let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                let phase = rng.random::<f64>() * 2.0 * PI;
                PathParams::toward(d, bounce.powi(bounces) / len, phase)
            })
            .collect();
        paths.sort_by(|a, b| b.gain.total_cmp(&a.gain));
        paths.truncate(s.max_paths);
        return Ok(paths);
    }
}

/// `H = sum_l alpha_l e^{j beta_l} a_N(cos theta_l) a_N(sin theta_l cos phi_l)^T`.
pub fn assemble_channel(paths: &[PathParams], n: usize) -> Result<ComplexGrid> {
    if paths.is_empty() {
        return Err(invalid("at least one path is required"));
    }
    let mut h = ComplexGrid::zeros(n);
    for p in paths {
        let (fr, fc) = p.spatial_freqs();
        let term = outer(&array_response(n, fr), &array_response(n, fc));
        let coef = Complex64::from_polar(p.gain, p.phase);
        for (acc, t) in h.as_mut_slice().iter_mut().zip(term.as_slice()) {
            *acc += coef * t;
        }
    }
    Ok(h)
}

/// Per-tap channels: each path goes to tap `floor(excess length / spacing)`
/// relative to the shortest path; paths past the last tap are dropped.
pub fn channel_taps(paths: &[PathParams], n: usize, taps: usize, spacing: f64) -> Result<Vec<ComplexGrid>> {
    if taps == 0 || !(spacing > 0.0) {
        return Err(invalid("need at least one tap and a positive spacing"));
    }
    let shortest = paths
        .iter()
        .map(|p| p.length)
        .fold(f64::INFINITY, f64::min);
    let mut bins: Vec<Vec<PathParams>> = vec![Vec::new(); taps];
    for p in paths {
        let tap = ((p.length - shortest) / spacing).floor() as usize;
        if tap < taps {
            bins[tap].push(*p);
        }
    }
    Ok(bins
        .iter()
        .map(|b| {
            if b.is_empty() {
                ComplexGrid::zeros(n)
            } else {
                assemble_channel(b, n).expect("nonempty")
            }
        })
        .collect())
}

/// Entrywise sum of delay taps.
pub fn wideband_aggregate(taps: &[ComplexGrid]) -> Result<ComplexGrid> {
    let first = taps.first().ok_or_else(|| invalid("no taps"))?;
    let mut acc = first.clone();
    for t in &taps[1..] {
        acc = &acc + t;
    }
    if taps.iter().any(|t| t.rows() != first.rows() || t.cols() != first.cols()) {
        return Err(crate::error::dim("taps differ in size"));
    }
    Ok(acc)
}

/// `sigma^2 = mean(||H||_F^2 / N^2) / 10^(snr_db / 10)`.
pub fn calibrate_noise(channels: &[ComplexGrid], target_snr_db: f64) -> Result<f64> {
    if channels.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    let mean = channels
        .iter()
        .map(|h| h.frobenius_norm().powi(2) / (h.rows() * h.cols()) as f64)
        .sum::<f64>()
        / channels.len() as f64;
    Ok(mean / 10f64.powf(target_snr_db / 10.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexGrid,
    /// Beamspace channel `idft2(H)`.
    pub x: ComplexGrid,
    pub true_best: FlatIndex,
    pub sigma2: f64,
}

impl ChannelRealization {
    pub fn new(h: ComplexGrid, sigma2: f64) -> Result<Self> {
        let x = idft2(&h)?;
        let true_best = x.argmax_abs();
        Ok(ChannelRealization {
            h,
            x,
            true_best,
            sigma2,
        })
    }
}

/// One realization's channel before ensemble normalization.
pub fn raw_channel(s: &Scenario, index: u64) -> Result<ComplexGrid> {
    let mut rng = stream(s.seed, Domain::Channel, index);
    let paths = sample_paths(s, &mut rng)?;
    if s.wideband_taps > 0 {
        wideband_aggregate(&channel_taps(&paths, s.n, s.wideband_taps, s.tap_spacing_m)?)
    } else {
        assemble_channel(&paths, s.n)
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub realizations: Vec<ChannelRealization>,
    pub sigma2: f64,
    /// Amplitude factor applied to every raw channel.
    pub scale: f64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn prior(&self) -> Result<AoDPrior> {
        empirical_prior(&self.realizations)
    }
}

/// `count` realizations scaled so that `mean ||H||_F^2 / N^2 = 1`, with noise
/// calibrated to `snr_db`.
pub fn generate_ensemble(s: &Scenario, count: usize, snr_db: f64, exec: Exec) -> Result<Ensemble> {
    s.validate()?;
    if count == 0 {
        return Err(invalid("ensemble size must be positive"));
    }
    let raw = exec.try_map(count, |i| raw_channel(s, i as u64))?;
    let n2 = (s.n * s.n) as f64;
    let mean = raw.iter().map(|h| h.frobenius_norm().powi(2) / n2).sum::<f64>() / count as f64;
    if !(mean > 0.0) {
        return Err(invalid("ensemble has zero energy"));
    }
    let scale = 1.0 / mean.sqrt();
    let hs: Vec<ComplexGrid> = raw.into_iter().map(|h| h.scale(scale)).collect();
    let sigma2 = calibrate_noise(&hs, snr_db)?;
    let realizations = exec.try_map(count, |i| ChannelRealization::new(hs[i].clone(), sigma2))?;
    Ok(Ensemble {
        realizations,
        sigma2,
        scale,
    })
}

/// Frequency of each direction being the strongest.
pub fn empirical_prior(realizations: &[ChannelRealization]) -> Result<AoDPrior> {
    let first = realizations.first().ok_or_else(|| invalid("empty ensemble"))?;
    let n = first.x.side()?;
    let mut counts = vec![0u64; n * n];
    for r in realizations {
        counts[r.true_best.0] += 1;
    }
    AoDPrior::from_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn los_only() -> Scenario {
        Scenario {
            blockage_prob: 0.0,
            wall_reflections: false,
            ground_reflections: false,
            ..Scenario::default()
        }
    }

    #[test]
    fn single_broadside_path_is_all_ones() {
        let p = PathParams {
            gain: 1.0,
            phase: 0.0,
            theta: PI / 2.0,
            phi: PI / 2.0,
            length: 1.0,
        };
        let h = assemble_channel(&[p], 8).unwrap();
        assert!(h.max_abs_diff(&ComplexGrid::filled(8, Complex64::new(1.0, 0.0))) < 1e-12);
        let x = idft2(&h).unwrap();
        assert!(x.max_abs_diff(&ComplexGrid::delta(8, 0, 0, Complex64::new(8.0, 0.0))) < 1e-12);
    }

    #[test]
    fn two_paths_match_entrywise_formula() {
        let n = 8;
        let paths = [
            PathParams { gain: 0.7, phase: 1.1, theta: 2.0, phi: 0.4, length: 5.0 },
            PathParams { gain: 0.2, phase: 4.0, theta: 1.2, phi: 2.5, length: 9.0 },
        ];
        let h = assemble_channel(&paths, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut want = Complex64::new(0.0, 0.0);
                for p in &paths {
                    let arg = p.phase
                        + PI * i as f64 * p.theta.cos()
                        + PI * j as f64 * p.theta.sin() * p.phi.cos();
                    want += Complex64::from_polar(p.gain, arg);
                }
                assert!((h[(i, j)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn los_only_gives_one_path_with_hand_geometry() {
        let s = los_only();
        let mut rng = stream(5, Domain::Channel, 0);
        for _ in 0..50 {
            let paths = sample_paths(&s, &mut rng).unwrap();
            assert_eq!(paths.len(), 1);
            let p = paths[0];
            let dz = s.rx_height - s.bs_height;
            // Reconstruct the receiver from the ray and check it lies in a lane.
            let y = p.length * p.theta.sin() * p.phi.sin();
            let x = p.length * p.theta.sin() * p.phi.cos();
            assert!((p.length * p.theta.cos() - dz).abs() < 1e-9);
            assert!((y - s.lane_center(0)).abs() < 1e-9 || (y - s.lane_center(1)).abs() < 1e-9);
            assert!(x.abs() <= s.coverage_length / 2.0 + 1e-9);
            assert!((p.gain - 1.0 / p.length).abs() < 1e-15);
            assert!(p.phi > 0.0 && p.phi < PI && p.theta > 0.0 && p.theta < PI);
        }
    }

    #[test]
    fn reflections_are_attenuated_and_sorted() {
        let s = Scenario {
            blockage_prob: 0.0,
            max_paths: 8,
            ..Scenario::default()
        };
        let mut rng = stream(9, Domain::Channel, 0);
        let paths = sample_paths(&s, &mut rng).unwrap();
        assert_eq!(paths.len(), 4);
        for w in paths.windows(2) {
            assert!(w[0].gain >= w[1].gain);
        }
        let los = paths.iter().min_by(|a, b| a.length.total_cmp(&b.length)).unwrap();
        assert!((los.gain - 1.0 / los.length).abs() < 1e-15);
        let s1 = Scenario { max_paths: 2, ..s };
        let mut rng = stream(9, Domain::Channel, 0);
        assert_eq!(sample_paths(&s1, &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn fully_blocked_without_reflections_resamples() {
        let s = Scenario {
            blockage_prob: 1.0,
            wall_reflections: false,
            ground_reflections: true,
            ..Scenario::default()
        };
        let mut rng = stream(1, Domain::Channel, 0);
        let paths = sample_paths(&s, &mut rng).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(paths[0].theta.cos() < 0.0);
    }

    #[test]
    fn noise_calibration() {
        let h = ComplexGrid::filled(4, Complex64::new(1.0, 0.0));
        assert!((calibrate_noise(&[h.clone(), h.clone()], 10.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((calibrate_noise(std::slice::from_ref(&h), 0.0).unwrap() - 1.0).abs() < 1e-15);
        let g = h.scale(2.0);
        let want = (1.0 + 4.0) / 2.0 / 10f64.powf(0.3);
        assert!((calibrate_noise(&[h, g], 3.0).unwrap() - want).abs() < 1e-14);
        assert!(calibrate_noise(&[], 10.0).is_err());
    }

    #[test]
    fn wideband_sum() {
        let a = ComplexGrid::from_fn(4, |r, c| Complex64::new(r as f64, c as f64));
        let b = ComplexGrid::from_fn(4, |r, c| Complex64::new(c as f64, -(r as f64)));
        assert_eq!(wideband_aggregate(std::slice::from_ref(&a)).unwrap(), a);
        let sum = wideband_aggregate(&[a.clone(), b.clone()]).unwrap();
        for i in 0..16 {
            assert_eq!(sum.as_slice()[i], a.as_slice()[i] + b.as_slice()[i]);
        }
        assert!(wideband_aggregate(&[]).is_err());
        let z = wideband_aggregate(&[ComplexGrid::zeros(4), ComplexGrid::zeros(4)]).unwrap();
        assert_eq!(z, ComplexGrid::zeros(4));
    }

    #[test]
    fn taps_sum_back_to_narrowband() {
        let s = Scenario { blockage_prob: 0.0, max_paths: 4, ..Scenario::default() };
        let mut rng = stream(3, Domain::Channel, 0);
        let paths = sample_paths(&s, &mut rng).unwrap();
        let taps = channel_taps(&paths, 8, 1000, 0.1).unwrap();
        let h = assemble_channel(&paths, 8).unwrap();
        assert!(wideband_aggregate(&taps).unwrap().max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn ensemble_is_normalized_deterministic_and_consistent() {
        let s = Scenario { n: 8, ..Scenario::default() };
        let a = generate_ensemble(&s, 64, 10.0, Exec::Parallel).unwrap();
        let b = generate_ensemble(&s, 64, 10.0, Exec::Sequential).unwrap();
        assert_eq!(a.realizations, b.realizations);
        let mean: f64 = a.realizations.iter().map(|r| r.h.frobenius_norm().powi(2) / 64.0).sum::<f64>() / 64.0;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((a.sigma2 - 0.1).abs() < 1e-12);
        for r in &a.realizations {
            let back = crate::grid::dft2(&r.x).unwrap();
            assert!(back.max_abs_diff(&r.h) < 1e-9);
            assert_eq!(r.true_best, r.x.argmax_abs());
        }
        let p = a.prior().unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_prior_counts() {
        let one = ChannelRealization::new(ComplexGrid::filled(4, Complex64::new(1.0, 0.0)), 0.1).unwrap();
        assert_eq!(empirical_prior(&[one.clone(), one.clone()]).unwrap(), AoDPrior::one_hot(16, 0));
        let x = ComplexGrid::delta(4, 1, 2, Complex64::new(4.0, 0.0));
        let h = crate::grid::dft2(&x).unwrap();
        let two = ChannelRealization::new(h, 0.1).unwrap();
        assert_eq!(two.true_best, FlatIndex(6));
        let p = empirical_prior(&[one, two]).unwrap();
        assert_eq!(p.probs()[0], 0.5);
        assert_eq!(p.probs()[6], 0.5);
        assert!(empirical_prior(&[]).is_err());
    }

    #[test]
    fn config_overrides_and_errors() {
        let mut s = Scenario::default();
        s.apply(&KvConfig::parse("n = 16\nposition_law = erlang\nerlang_k = 3\n").unwrap()).unwrap();
        assert_eq!(s.n, 16);
        assert_eq!(s.position_law, PositionLaw::Erlang { k: 3, theta: 10.0 });
        let mut s = Scenario::default();
        let err = s.apply(&KvConfig::parse("n = 8\n\nblockage_prob = 1.5\n").unwrap()).unwrap_err();
        assert!(matches!(err, crate::Error::Config { line: 3, .. }), "{err}");
        let mut s = Scenario::default();
        let err = s.apply(&KvConfig::parse("n = 12\n").unwrap()).unwrap_err();
        assert!(matches!(err, crate::Error::Config { line: 1, .. }));
        let mut s = Scenario::default();
        assert!(s.apply(&KvConfig::parse("n = 12\nrequire_pow2 = false\n").unwrap()).is_ok());
    }
}
