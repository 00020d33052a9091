use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use ccsbeam::beamforming::exhaustive_sweep;
use ccsbeam::ccs::sample_shift_set;
use ccsbeam::channel::{generate_ensemble, sample_paths, ChannelRealization, Ensemble, Scenario};
use ccsbeam::exec::Exec;
use ccsbeam::grid::{dft2, ComplexGrid, FlatIndex};
use ccsbeam::learner::{run_episode, ucb_index, EpisodeConfig, ExploreConfig, LearnerKind, LearnerState, MeasurementSchedule};
use ccsbeam::rng::{complex_gaussian, stream, uniform_phase, Domain};

#[test]
fn los_directions_lie_on_two_lane_strips() {
    let s = Scenario {
        blockage_prob: 0.0,
        wall_reflections: false,
        ground_reflections: false,
        ..Scenario::default()
    };
    let dz = s.bs_height - s.rx_height;
    let ratios = [s.lane_center(0) / dz, s.lane_center(1) / dz];
    let mut per_lane = [0usize; 2];
    let mut rng = stream(3, Domain::Channel, 0);
    for _ in 0..10_000 {
        let paths = sample_paths(&s, &mut rng).unwrap();
        assert_eq!(paths.len(), 1);
        let (u, v) = paths[0].spatial_freqs();
        // Lateral over vertical distance, recovered from the two spatial frequencies.
        let r = (1.0 - u * u - v * v).max(0.0).sqrt() / u.abs();
        let lane = ratios
            .iter()
            .position(|&want| (r - want).abs() < 1e-9)
            .unwrap_or_else(|| panic!("ratio {r} is on neither strip"));
        per_lane[lane] += 1;
    }
    assert!(per_lane.iter().all(|&c| c > 4_500), "{per_lane:?}");
}

#[test]
fn ensemble_prior_is_concentrated() {
    let ens = generate_ensemble(&Scenario::default(), 3000, 10.0, Exec::Parallel).unwrap();
    let p = ens.prior().unwrap();
    let mut probs = p.probs().to_vec();
    probs.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = probs[..probs.len() / 10].iter().sum();
    assert!(top > 0.9, "top 10% of beams carry {top}");
    assert!(p.entropy() < 0.75 * (p.len() as f64).ln());
}

#[test]
fn shift_sampling_is_uniform() {
    let (n, m, draws) = (8, 10, 100_000);
    let mut counts = vec![0u64; n * n];
    let mut rng = stream(17, Domain::Sampling, 0);
    for _ in 0..draws {
        for s in sample_shift_set(n, m, &mut rng).unwrap().coords() {
            counts[s.r * n + s.c] += 1;
        }
    }
    let expected = (draws * m) as f64 / (n * n) as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let crit = ChiSquared::new((n * n - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < crit, "chi-square {stat} >= {crit}");
}

#[test]
fn ucb_index_approaches_means() {
    let cfg = ExploreConfig::default();
    let mut st = LearnerState::new(4);
    for t in 0..4000 {
        st.record_reward(FlatIndex(t % 3)).unwrap();
    }
    let gap = ucb_index(&st, &cfg)
        .iter()
        .zip(st.mu())
        .map(|(i, m)| (i - m).abs())
        .fold(0.0, f64::max);
    assert!((gap - 0.1 / 4000f64.sqrt()).abs() < 1e-15);
}

#[test]
fn alternating_rewards_match_tally() {
    let mut st = LearnerState::new(4);
    let mut tally = [0u64; 4];
    for t in 0..37 {
        st.record_reward(FlatIndex(t % 2)).unwrap();
        tally[t % 2] += 1;
        let total = (t + 1) as f64;
        for (k, mu) in st.mu().iter().enumerate() {
            assert_eq!(*mu, tally[k] as f64 / total);
        }
    }
}

#[test]
fn exhaustive_sweep_finds_strong_one_sparse_beam() {
    let mut hits = 0;
    let mut rng = stream(5, Domain::Noise, 0);
    for k in 0..200 {
        let x = ComplexGrid::delta(8, (k / 8) % 8, k % 8, Complex64::new(0.0, 10.0));
        if exhaustive_sweep(&x, 1.0, &mut rng) == FlatIndex(k % 64) {
            hits += 1;
        }
    }
    assert_eq!(hits, 200);
}

fn ensemble_of(channels: Vec<ComplexGrid>, sigma2: f64) -> Ensemble {
    Ensemble {
        realizations: channels
            .into_iter()
            .map(|h| ChannelRealization::new(h, sigma2).unwrap())
            .collect(),
        sigma2,
        scale: 1.0,
    }
}

#[test]
fn noiseless_full_sampling_locks_on_immediately() {
    let n = 4;
    let mut x = ComplexGrid::zeros(n);
    x[(2, 1)] = Complex64::new(3.0, 1.0);
    x[(0, 3)] = Complex64::new(0.5, 0.0);
    let h = dft2(&x).unwrap();
    let ens = ensemble_of(vec![h; 30], 0.0);
    let best = ens.realizations[0].true_best;
    for kind in [LearnerKind::RegMask, LearnerKind::Ucb] {
        let mut cfg = EpisodeConfig::new(kind, MeasurementSchedule::fixed(n * n).unwrap(), 1);
        cfg.mask_sigma2 = Some(0.1);
        let ep = run_episode(&ens, &cfg, 0).unwrap();
        assert!(ep.steps.iter().all(|s| s.s == best.0));
        assert_eq!(ep.state.mu()[best.0], 1.0);
        assert_eq!(ep.steps.last().unwrap().hellinger, 0.0);
    }
}

/// Two dominant directions that alternate as the strongest.
fn two_beam_ensemble(seed: u64, count: usize) -> Ensemble {
    let n = 8;
    let (a, b) = (FlatIndex(9), FlatIndex(46));
    let mut rng = stream(seed, Domain::Channel, 0);
    let channels = (0..count)
        .map(|i| {
            let (strong, weak) = if i % 2 == 0 { (a, b) } else { (b, a) };
            let mut x = ComplexGrid::zeros(n);
            x.as_mut_slice()[strong.0] = Complex64::from_polar(4.0, uniform_phase(&mut rng));
            x.as_mut_slice()[weak.0] = Complex64::from_polar(3.0, uniform_phase(&mut rng));
            for v in x.as_mut_slice() {
                *v += complex_gaussian(&mut rng, 0.01);
            }
            dft2(&x).unwrap()
        })
        .collect();
    ensemble_of(channels, 1.0)
}

/// Setting frozen from a seeded pilot (c in {0.1, 0.5, 2}, M in {6, 16}).
#[test]
fn exploration_helps_on_some_seed() {
    let sched = MeasurementSchedule::fixed(16).unwrap();
    let mut found = false;
    for seed in 0..8 {
        let ens = two_beam_ensemble(seed, 300);
        let mut greedy = EpisodeConfig::new(LearnerKind::NoExplore, sched, seed);
        greedy.sparsity = 1;
        let mut reg = EpisodeConfig::new(LearnerKind::RegMask, sched, seed);
        reg.sparsity = 1;
        reg.explore = ExploreConfig::new(0.5, 1e4).unwrap();
        let hg = run_episode(&ens, &greedy, 0).unwrap().steps.last().unwrap().hellinger;
        let hr = run_episode(&ens, &reg, 0).unwrap().steps.last().unwrap().hellinger;
        eprintln!("seed {seed}: no-explore {hg:.4}, regularized {hr:.4}");
        found |= hg > hr;
    }
    assert!(found);
}
