//! Sequential vs rayon execution of the data-parallel loops.
//!
//! Without the `parallel` feature both variants run on one thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ccsbeam::campaign::{run_on_ensemble, CampaignConfig, Method};
use ccsbeam::channel::{generate_ensemble, Scenario};
use ccsbeam::exec::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn ensemble(c: &mut Criterion) {
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    let s = Scenario {
        wideband_taps: 8,
        ..Scenario::default()
    };
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::new(name, 2000), &exec, |b, &exec| {
            b.iter(|| generate_ensemble(black_box(&s), 2000, 10.0, exec).unwrap())
        });
    }
    g.finish();
}

fn campaign(c: &mut Criterion) {
    let mut g = c.benchmark_group("campaign");
    g.sample_size(10);
    let base = CampaignConfig {
        methods: vec![Method::PerfectCsi, Method::Exhaustive, Method::CcsUniform, Method::CcsPrior],
        m_values: vec![20, 100],
        trials: 200,
        ..CampaignConfig::default()
    };
    let ens = generate_ensemble(&base.scenario, base.trials, base.snr_db, Exec::Parallel).unwrap();
    for (name, exec) in POLICIES {
        let cfg = CampaignConfig { exec, ..base.clone() };
        g.bench_with_input(BenchmarkId::new(name, cfg.trials), &cfg, |b, cfg| {
            b.iter(|| run_on_ensemble(black_box(cfg), &ens).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ensemble, campaign);
criterion_main!(benches);
