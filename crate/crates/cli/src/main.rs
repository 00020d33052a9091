use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ccsbeam::campaign::{
    parse_trials_csv, run_campaign, summarize, summary_csv, trials_csv, CampaignConfig, CampaignResult, Method,
    SummaryRow,
};
use ccsbeam::channel::{generate_ensemble, Scenario};
use ccsbeam::config::{header_lines, KvConfig};
use ccsbeam::dump::{amplitude_grid, write_grids};
use ccsbeam::exec::Exec;
use ccsbeam::learner::{run_episode, EpisodeConfig, ExploreConfig, LearnerKind, MeasurementSchedule};

const ONLINE_KEYS: &[&str] = &["learner", "c", "n_inf", "schedule", "steps", "snapshot_every"];

#[derive(Parser, Debug)]
#[command(name = "ccsbeam", version, about = "2D-CCS beam alignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Realizations (or episode steps for `online`).
    #[arg(long)]
    trials: Option<usize>,
    /// Array side N.
    #[arg(long)]
    n: Option<usize>,
    /// Measurement budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a channel ensemble and its empirical AoD prior.
    Generate(Common),
    /// Perfect-prior 2D-CCS against the uniform mask.
    Offline(Common),
    /// Online prior learning over one episode.
    Online {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        learner: Option<String>,
        /// `M0,dM,dT,Mmin`.
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Beam-sweep baselines.
    Sweep(Common),
    /// Summarize a per-trial CSV.
    Report {
        /// Per-trial CSV written by `offline` or `sweep`.
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(common: &Common, extra_keys: &[&str]) -> Result<KvConfig> {
    let kv = match &common.config {
        Some(p) => KvConfig::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => KvConfig::default(),
    };
    let mut known: Vec<&str> = Scenario::KEYS.to_vec();
    known.extend_from_slice(CampaignConfig::KEYS);
    known.extend_from_slice(extra_keys);
    kv.check_known(&known)?;
    Ok(kv)
}

fn campaign_config(common: &Common, kv: &KvConfig, default_methods: &[Method]) -> Result<CampaignConfig> {
    let mut cfg = CampaignConfig {
        methods: default_methods.to_vec(),
        ..CampaignConfig::default()
    };
    cfg.apply(kv)?;
    if let Some(s) = common.seed {
        cfg.scenario.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(n) = common.n {
        cfg.scenario.n = n;
    }
    if let Some(m) = &common.m {
        cfg.m_values = m.clone();
    } else if !cfg.methods.iter().any(|m| m.uses_m()) {
        cfg.m_values.clear();
    }
    if let Some(s) = common.snr_db {
        cfg.snr_db = s;
    }
    cfg.exec = if common.sequential { Exec::Sequential } else { Exec::Parallel };
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<12} {:>5} {:>7} {:>12} {:>14} {:>10}",
        "method", "M", "trials", "RSRP [dB]", "BF loss [dB]", "aligned"
    );
    for r in rows {
        println!(
            "{:<12} {:>5} {:>7} {:>12.2} {:>14.2} {:>10.3}",
            r.method.name(),
            r.m,
            r.trials,
            r.mean_rsrp_db,
            r.mean_bf_loss_db,
            r.alignment_rate
        );
    }
}

fn campaign_outputs(cfg: &CampaignConfig, res: &CampaignResult, out: &Path) -> Result<()> {
    let mut header = cfg.echo();
    header.push(("sigma2".into(), res.sigma2.to_string()));
    write(out, "trials.csv", &trials_csv(&header, &res.records))?;
    let p = write(out, "summary.csv", &summary_csv(&header, &res.summary))?;
    if let Some(d) = &res.prior_design {
        let mut h = header.clone();
        h.push(("gs_residual".into(), d.residual.to_string()));
        let mags = amplitude_grid(&d.mask.magnitudes())?;
        write(out, "mask.csv", &write_grids(&h, &[mags], None))?;
    }
    print_summary(&res.summary);
    eprintln!("wrote {}", p.display());
    Ok(())
}

fn generate(common: &Common) -> Result<()> {
    let kv = load_config(common, &[])?;
    let cfg = campaign_config(common, &kv, &[Method::PerfectCsi])?;
    let ens = generate_ensemble(&cfg.scenario, cfg.trials, cfg.snr_db, cfg.exec)?;
    let mut header = cfg.scenario.echo();
    header.push(("trials".into(), cfg.trials.to_string()));
    header.push(("snr_db".into(), cfg.snr_db.to_string()));
    header.push(("sigma2".into(), ens.sigma2.to_string()));
    header.push(("scale".into(), ens.scale.to_string()));
    let hs: Vec<_> = ens.realizations.iter().map(|r| r.h.clone()).collect();
    write(&common.out, "ensemble.csv", &write_grids(&header, &hs, None))?;
    let prior = ens.prior()?;
    let n = cfg.scenario.n;
    let mut text = header_lines(&header);
    text.push_str("k,row,col,p\n");
    for (k, p) in prior.probs().iter().enumerate() {
        text.push_str(&format!("{k},{},{},{p}\n", k / n, k % n));
    }
    let path = write(&common.out, "prior.csv", &text)?;
    println!(
        "{} realizations, sigma2 = {:.6}, prior entropy = {:.3} nats, most likely direction = {}",
        ens.len(),
        ens.sigma2,
        prior.entropy(),
        prior.argmax().0
    );
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn online(common: &Common, learner: Option<&str>, schedule: Option<&str>) -> Result<()> {
    let kv = load_config(common, ONLINE_KEYS)?;
    let mut cfg = campaign_config(common, &kv, &[Method::PerfectCsi])?;
    let steps: Option<usize> = kv.get("steps")?;
    cfg.trials = common.trials.or(steps).unwrap_or(3000);
    let kind: LearnerKind = match learner.or(kv.raw("learner")) {
        Some(s) => s.parse()?,
        None => LearnerKind::RegMask,
    };
    let sched: MeasurementSchedule = match schedule.or(kv.raw("schedule")) {
        Some(s) => s.parse()?,
        None => match &common.m {
            Some(m) if m.len() == 1 => MeasurementSchedule::fixed(m[0])?,
            Some(_) => bail!("online takes a single --m or a --schedule"),
            None => MeasurementSchedule::new(300, 20, 100, 25)?,
        },
    };
    let mut ep = EpisodeConfig::new(kind, sched, cfg.scenario.seed);
    let mut c = ExploreConfig::default();
    kv.set("c", &mut c.c)?;
    kv.set("n_inf", &mut c.n_inf)?;
    ep.explore = ExploreConfig::new(c.c, c.n_inf)?;
    ep.sparsity = cfg.sparsity;
    ep.gs_iterations = cfg.gs_iterations;
    ep.power_floor = cfg.power_floor;
    ep.mask_sigma2 = cfg.mask_sigma2;
    let snapshot_every: usize = kv.get("snapshot_every")?.unwrap_or(0);

    let ens = generate_ensemble(&cfg.scenario, cfg.trials, cfg.snr_db, cfg.exec)?;
    let episode = run_episode(&ens, &ep, snapshot_every)?;

    let mut header = cfg.scenario.echo();
    for (k, v) in [
        ("steps", cfg.trials.to_string()),
        ("snr_db", cfg.snr_db.to_string()),
        ("sigma2", ens.sigma2.to_string()),
        ("learner", kind.to_string()),
        ("c", ep.explore.c.to_string()),
        ("n_inf", ep.explore.n_inf.to_string()),
        ("schedule", sched.to_string()),
        ("sparsity", ep.sparsity.to_string()),
        ("gs_iterations", ep.gs_iterations.to_string()),
        ("power_floor", ep.power_floor.to_string()),
        ("mask_sigma2", ep.mask_sigma2.map_or("calibrated".into(), |s| s.to_string())),
        ("snapshot_every", snapshot_every.to_string()),
    ] {
        header.push((k.to_string(), v));
    }
    // JSON-lines has no comment syntax, so the config goes into a sidecar.
    write(&common.out, "trajectory.config", &header_lines(&header))?;
    let path = write(&common.out, "trajectory.jsonl", &episode.to_jsonl())?;
    if !episode.snapshots.is_empty() {
        let ids: Vec<usize> = episode.snapshots.iter().map(|(t, _)| *t).collect();
        let grids = episode
            .snapshots
            .iter()
            .map(|(_, a)| amplitude_grid(a))
            .collect::<ccsbeam::Result<Vec<_>>>()?;
        write(&common.out, "masks.csv", &write_grids(&header, &grids, Some(&ids)))?;
    }
    let last = episode.steps.last().context("empty episode")?;
    let mean_loss = episode.steps.iter().map(|s| s.bf_loss_db).sum::<f64>() / episode.steps.len() as f64;
    println!(
        "{kind}: {} steps, final Hellinger = {:.4}, mean BF loss = {:.2} dB",
        episode.steps.len(),
        last.hellinger,
        mean_loss
    );
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn report(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let (header, records) = parse_trials_csv(&text)?;
    let sigma2: f64 = header
        .iter()
        .find(|(k, _)| k == "sigma2")
        .context("input header lacks `sigma2`")?
        .1
        .parse()
        .context("parsing sigma2")?;
    let rows = summarize(&records, sigma2);
    let path = write(out, "report.csv", &summary_csv(&header, &rows))?;
    print_summary(&rows);
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Offline(c) => {
            let kv = load_config(c, &[])?;
            let cfg = campaign_config(c, &kv, &[Method::PerfectCsi, Method::CcsUniform, Method::CcsPrior])?;
            let res = run_campaign(&cfg)?;
            campaign_outputs(&cfg, &res, &c.out)
        }
        Command::Sweep(c) => {
            let kv = load_config(c, &[])?;
            let cfg = campaign_config(c, &kv, &[Method::PerfectCsi, Method::Exhaustive, Method::TopM])?;
            let res = run_campaign(&cfg)?;
            campaign_outputs(&cfg, &res, &c.out)
        }
        Command::Online {
            common,
            learner,
            schedule,
        } => online(common, learner.as_deref(), schedule.as_deref()),
        Command::Report { input, out } => report(input, out),
    }
}
