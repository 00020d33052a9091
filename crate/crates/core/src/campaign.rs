//! Batch experiments: every method on every realization of one ensemble.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::beamforming::{
    bf_gain, bf_loss_db, ccs_align, dft_beam, exhaustive_sweep, perfect_csi_bf, rsrp_db, top_m_sweep,
};
use crate::ccs::{BaseMatrix, Mask, OmpOptions, DEFAULT_SPARSITY};
use crate::channel::{generate_ensemble, Ensemble, Scenario};
use crate::config::{header_lines, KvConfig};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::gs::{gerchberg_saxton, DEFAULT_GS_ITERATIONS};
use crate::mask::{optimize_mask_power, DEFAULT_POWER_FLOOR};
use crate::prior::AoDPrior;
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    PerfectCsi,
    Exhaustive,
    TopM,
    CcsUniform,
    CcsPrior,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::PerfectCsi,
        Method::Exhaustive,
        Method::TopM,
        Method::CcsUniform,
        Method::CcsPrior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PerfectCsi => "perfect-csi",
            Method::Exhaustive => "exhaustive",
            Method::TopM => "top-m",
            Method::CcsUniform => "ccs-uniform",
            Method::CcsPrior => "ccs-prior",
        }
    }

    /// Whether the method's cost depends on the measurement budget `M`.
    pub fn uses_m(self) -> bool {
        matches!(self, Method::TopM | Method::CcsUniform | Method::CcsPrior)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub snr_db: f64,
    pub sparsity: usize,
    pub gs_iterations: usize,
    pub power_floor: f64,
    /// Noise variance for the mask optimizer; `None` uses the calibrated one.
    pub mask_sigma2: Option<f64>,
    pub exec: Exec,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            scenario: Scenario::default(),
            methods: Method::ALL.to_vec(),
            m_values: vec![20, 40, 100],
            trials: 500,
            snr_db: 10.0,
            sparsity: DEFAULT_SPARSITY,
            gs_iterations: DEFAULT_GS_ITERATIONS,
            power_floor: DEFAULT_POWER_FLOOR,
            mask_sigma2: None,
            exec: Exec::Parallel,
        }
    }
}

impl CampaignConfig {
    pub const KEYS: &'static [&'static str] = &[
        "methods",
        "m_values",
        "trials",
        "snr_db",
        "sparsity",
        "gs_iterations",
        "power_floor",
        "mask_sigma2",
    ];

    pub fn apply(&mut self, cfg: &KvConfig) -> Result<()> {
        self.scenario.apply(cfg)?;
        if let Some(raw) = cfg.raw("methods") {
            self.methods = parse_list(raw).map_err(|e| cfg.error("methods", e))?;
        }
        if let Some(raw) = cfg.raw("m_values") {
            self.m_values = parse_list(raw).map_err(|e| cfg.error("m_values", e))?;
        }
        cfg.set("trials", &mut self.trials)?;
        cfg.set("snr_db", &mut self.snr_db)?;
        cfg.set("sparsity", &mut self.sparsity)?;
        cfg.set("gs_iterations", &mut self.gs_iterations)?;
        cfg.set("power_floor", &mut self.power_floor)?;
        if let Some(v) = cfg.get::<f64>("mask_sigma2")? {
            self.mask_sigma2 = Some(v);
        }
        self.check().map_err(|(k, msg)| cfg.error(k, msg))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.check().map_err(|(k, msg)| invalid(format!("{k}: {msg}")))
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let n2 = self.scenario.n * self.scenario.n;
        if self.methods.is_empty() {
            return Err(("methods", "at least one method is required".into()));
        }
        if self.trials == 0 {
            return Err(("trials", "must be positive".into()));
        }
        if self.methods.iter().any(|m| m.uses_m()) && self.m_values.is_empty() {
            return Err(("m_values", "required by the selected methods".into()));
        }
        if let Some(&m) = self.m_values.iter().find(|&&m| m == 0 || m > n2) {
            return Err(("m_values", format!("{m} outside 1..={n2}")));
        }
        if self.sparsity == 0 {
            return Err(("sparsity", "must be positive".into()));
        }
        if self.gs_iterations == 0 {
            return Err(("gs_iterations", "must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.power_floor) {
            return Err(("power_floor", "must lie in [0, 1]".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(("snr_db", "must be finite".into()));
        }
        if let Some(s) = self.mask_sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(("mask_sigma2", "must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v = self.scenario.echo();
        v.push(("methods".into(), join(&self.methods)));
        v.push(("m_values".into(), join(&self.m_values)));
        v.push(("trials".into(), self.trials.to_string()));
        v.push(("snr_db".into(), self.snr_db.to_string()));
        v.push(("sparsity".into(), self.sparsity.to_string()));
        v.push(("gs_iterations".into(), self.gs_iterations.to_string()));
        v.push(("power_floor".into(), self.power_floor.to_string()));
        v.push((
            "mask_sigma2".into(),
            self.mask_sigma2.map_or("calibrated".into(), |s| s.to_string()),
        ));
        v
    }

    /// `(method, M)` jobs in output order; `M = n^2` for budget-free methods.
    pub fn jobs(&self) -> Vec<(Method, usize)> {
        let n2 = self.scenario.n * self.scenario.n;
        let mut jobs = Vec::new();
        for &method in &self.methods {
            if method.uses_m() {
                jobs.extend(self.m_values.iter().map(|&m| (method, m)));
            } else {
                jobs.push((method, n2));
            }
        }
        jobs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub realization: usize,
    pub method: Method,
    pub m: usize,
    pub chosen: Option<usize>,
    pub true_best: usize,
    pub rsrp_db: f64,
    pub bf_gain: f64,
    pub bf_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub m: usize,
    pub trials: usize,
    pub mean_rsrp_db: f64,
    pub mean_bf_loss_db: f64,
    /// RSRP of the mean linear gain.
    pub rsrp_of_mean_gain_db: f64,
    pub alignment_rate: f64,
}

/// Base matrix and realized mask used by one 2D-CCS method.
#[derive(Debug, Clone)]
pub struct CcsDesign {
    pub base: BaseMatrix,
    pub mask: Mask,
    /// Phase-retrieval residual against the target amplitudes (0 for the chirp).
    pub residual: f64,
}

/// Flat-mask design from the chirp base.
pub fn uniform_design(n: usize) -> CcsDesign {
    let base = BaseMatrix::chirp(n);
    let mask = base.mask();
    CcsDesign {
        base,
        mask,
        residual: 0.0,
    }
}

/// Mask optimized for `prior`, realized by phase retrieval.
pub fn prior_design(prior: &AoDPrior, sigma2: f64, floor: f64, iterations: usize, seed: u64) -> Result<CcsDesign> {
    let amps = optimize_mask_power(prior, sigma2, floor)?.amplitudes();
    let mut rng = stream(seed, Domain::PhaseInit, u64::MAX);
    let gs = gerchberg_saxton(&amps, iterations, &mut rng)?;
    let residual = gs.final_residual();
    let mask = gs.base.mask();
    Ok(CcsDesign {
        base: gs.base,
        mask,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub sigma2: f64,
    pub prior: AoDPrior,
    pub prior_design: Option<CcsDesign>,
}

/// Runs every configured method on each realization of a fresh ensemble.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let ensemble = generate_ensemble(&cfg.scenario, cfg.trials, cfg.snr_db, cfg.exec)?;
    run_on_ensemble(cfg, &ensemble)
}

/// Same as [`run_campaign`] on a given ensemble.
pub fn run_on_ensemble(cfg: &CampaignConfig, ensemble: &Ensemble) -> Result<CampaignResult> {
    cfg.validate()?;
    let n = cfg.scenario.n;
    let sigma2 = ensemble.sigma2;
    let prior = ensemble.prior()?;
    let jobs = cfg.jobs();
    let uniform = uniform_design(n);
    let informed = if cfg.methods.contains(&Method::CcsPrior) {
        let s2 = cfg.mask_sigma2.unwrap_or(sigma2);
        Some(prior_design(&prior, s2, cfg.power_floor, cfg.gs_iterations, cfg.scenario.seed)?)
    } else {
        None
    };
    let seed = cfg.scenario.seed;

    let per_trial = cfg.exec.try_map(ensemble.len(), |i| -> Result<Vec<TrialRecord>> {
        let real = &ensemble.realizations[i];
        let perfect_bf = perfect_csi_bf(&real.h)?;
        let perfect = bf_gain(&real.h, &perfect_bf)?;
        let mut out = Vec::with_capacity(jobs.len());
        for (j, &(method, m)) in jobs.iter().enumerate() {
            let idx = ((i as u64) << 16) | j as u64;
            let mut noise = stream(seed, Domain::Noise, idx);
            let mut samp = stream(seed, Domain::Sampling, idx);
            let (chosen, gain) = match method {
                Method::PerfectCsi => (None, perfect),
                Method::Exhaustive => {
                    let k = exhaustive_sweep(&real.x, sigma2, &mut noise);
                    (Some(k), bf_gain(&real.h, &dft_beam(n, k))?)
                }
                Method::TopM => {
                    let k = top_m_sweep(&real.x, &prior, m, sigma2, &mut noise)?;
                    (Some(k), bf_gain(&real.h, &dft_beam(n, k))?)
                }
                Method::CcsUniform | Method::CcsPrior => {
                    let d = if method == Method::CcsUniform {
                        &uniform
                    } else {
                        informed.as_ref().expect("built above")
                    };
                    let opts = OmpOptions {
                        sparsity: cfg.sparsity,
                        residual_floor: m as f64 * sigma2,
                    };
                    let a = ccs_align(&real.h, &d.base, &d.mask, m, sigma2, &opts, &mut samp, &mut noise)?;
                    (a.chosen, a.gain)
                }
            };
            out.push(TrialRecord {
                realization: i,
                method,
                m,
                chosen: chosen.map(|k| k.0),
                true_best: real.true_best.0,
                rsrp_db: rsrp_db(gain, sigma2),
                bf_gain: gain,
                bf_loss_db: if method == Method::PerfectCsi { 0.0 } else { bf_loss_db(gain, perfect) },
            });
        }
        Ok(out)
    })?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    let summary = summarize(&records, sigma2);
    Ok(CampaignResult {
        records,
        summary,
        sigma2,
        prior,
        prior_design: informed,
    })
}

/// Per `(method, M)` averages, in first-appearance order.
pub fn summarize(records: &[TrialRecord], sigma2: f64) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.method, r.m)) {
            keys.push((r.method, r.m));
        }
    }
    keys.into_iter()
        .map(|(method, m)| {
            let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method && r.m == m).collect();
            let k = rs.len() as f64;
            let aligned = rs.iter().filter(|r| r.chosen == Some(r.true_best)).count();
            SummaryRow {
                method,
                m,
                trials: rs.len(),
                mean_rsrp_db: rs.iter().map(|r| r.rsrp_db).sum::<f64>() / k,
                mean_bf_loss_db: rs.iter().map(|r| r.bf_loss_db).sum::<f64>() / k,
                rsrp_of_mean_gain_db: rsrp_db(rs.iter().map(|r| r.bf_gain).sum::<f64>() / k, sigma2),
                alignment_rate: if method == Method::PerfectCsi { 1.0 } else { aligned as f64 / k },
            }
        })
        .collect()
}

/// `# key = value` pairs echoed at the top of an output file.
pub type Header = Vec<(String, String)>;

pub const TRIALS_COLUMNS: &str = "realization,method,m,chosen,true_best,rsrp_db,bf_gain,bf_loss_db";
pub const SUMMARY_COLUMNS: &str = "method,m,trials,mean_rsrp_db,mean_bf_loss_db,rsrp_of_mean_gain_db,alignment_rate";

/// Per-trial CSV with a `# key = value` header.
pub fn trials_csv(header: &[(String, String)], records: &[TrialRecord]) -> String {
    let mut out = header_lines(header);
    out.push_str(TRIALS_COLUMNS);
    out.push('\n');
    for r in records {
        let chosen = r.chosen.map_or(String::new(), |k| k.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.realization, r.method, r.m, chosen, r.true_best, r.rsrp_db, r.bf_gain, r.bf_loss_db
        )
        .expect("write to string");
    }
    out
}

/// Summary CSV with a `# key = value` header.
pub fn summary_csv(header: &[(String, String)], rows: &[SummaryRow]) -> String {
    let mut out = header_lines(header);
    out.push_str(SUMMARY_COLUMNS);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{:.4}",
            r.method, r.m, r.trials, r.mean_rsrp_db, r.mean_bf_loss_db, r.rsrp_of_mean_gain_db, r.alignment_rate
        )
        .expect("write to string");
    }
    out
}

/// Parses a per-trial CSV back into records plus its header pairs.
pub fn parse_trials_csv(text: &str) -> Result<(Header, Vec<TrialRecord>)> {
    let mut header = Vec::new();
    let mut records = Vec::new();
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let bad = |msg: String| Error::Config { line: line_no, msg };
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                header.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_columns {
            if line.trim() != TRIALS_COLUMNS {
                return Err(bad(format!("expected column line `{TRIALS_COLUMNS}`")));
            }
            seen_columns = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(format!("expected 8 fields, got {}", f.len())));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| bad(format!("{what}: cannot parse `{s}`")))
        };
        let int = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| bad(format!("{what}: cannot parse `{s}`")))
        };
        records.push(TrialRecord {
            realization: int(f[0], "realization")?,
            method: f[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            m: int(f[2], "m")?,
            chosen: if f[3].is_empty() { None } else { Some(int(f[3], "chosen")?) },
            true_best: int(f[4], "true_best")?,
            rsrp_db: num(f[5], "rsrp_db")?,
            bf_gain: num(f[6], "bf_gain")?,
            bf_loss_db: num(f[7], "bf_loss_db")?,
        });
    }
    if !seen_columns {
        return Err(invalid("no column line found"));
    }
    Ok((header, records))
}
