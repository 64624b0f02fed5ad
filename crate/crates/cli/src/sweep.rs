//! One- and two-dimensional parameter sweeps.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cvqss_core::bounds::{bound_report, plob_bound, BoundReport, BoundSettings};
use cvqss_core::constellation::build_mixed_constellation;
use cvqss_core::security::KeyRateReport;

use crate::config::{SimulationConfig, Variance};
use crate::optimize::{configured_rate, key_rates_at, optimize_config};

/// Environment variable that caps the number of sweep workers.
pub const WORKERS_ENV: &str = "CVQSS_WORKERS";
/// SDD round counts reported by mean-photon sweeps.
pub const BOUND_ROUNDS: [usize; 4] = [1, 2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Distance,
    Ratio,
    Variance,
    Rounds,
    MeanPhoton,
}

impl FromStr for SweepParameter {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "distance" => Self::Distance,
            "ratio" => Self::Ratio,
            "variance" => Self::Variance,
            "rounds" => Self::Rounds,
            "mean_photon" | "n_mean" => Self::MeanPhoton,
            other => bail!("unknown sweep parameter `{other}`"),
        })
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Distance => "distance",
            Self::Ratio => "ratio",
            Self::Variance => "variance",
            Self::Rounds => "rounds",
            Self::MeanPhoton => "mean_photon",
        })
    }
}

/// Inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Range {
    pub fn new(from: f64, to: f64, step: f64) -> anyhow::Result<Self> {
        if !(from.is_finite() && to.is_finite() && step.is_finite()) {
            bail!("range bounds must be finite");
        }
        if from > to {
            bail!("range start {from} exceeds end {to}");
        }
        if !(step > 0.0) {
            bail!("range step must be > 0, got {step}");
        }
        Ok(Self { from, to, step })
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.from + i as f64 * self.step).collect()
    }
}

/// `from:to:step`.
impl FromStr for Range {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("expected from:to:step, got `{s}`");
        }
        let num = |p: &str| p.trim().parse::<f64>().with_context(|| format!("bad number `{p}` in `{s}`"));
        Range::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub range: Range,
}

/// `name:from:to:step`, e.g. `distance:0:100:1`.
impl FromStr for SweepSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (name, rest) = s.split_once(':').with_context(|| format!("expected name:from:to:step, got `{s}`"))?;
        let spec = SweepSpec {
            parameter: name.parse()?,
            range: rest.parse()?,
        };
        if spec.parameter == SweepParameter::Rounds && spec.range.values().iter().any(|v| v.fract() != 0.0) {
            bail!("rounds must be integers");
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateRow {
    pub distance_km: f64,
    pub ratio: f64,
    pub rounds: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub variance: f64,
    pub optimized: bool,
    pub below_threshold: bool,
    /// The configured objective (0 when the optimiser found nothing positive).
    pub rate: f64,
    pub plob: f64,
    pub report: KeyRateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub distance_km: f64,
    pub ratio: f64,
    pub n_mean: f64,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SweepRows {
    KeyRate(Vec<KeyRateRow>),
    Bound(Vec<BoundRow>),
}

impl SweepRows {
    pub fn len(&self) -> usize {
        match self {
            SweepRows::KeyRate(r) => r.len(),
            SweepRows::Bound(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl KeyRateRow {
    pub fn new(
        cfg: &SimulationConfig,
        variance: f64,
        report: KeyRateReport,
        optimized: bool,
        below_threshold: bool,
        rate: f64,
    ) -> anyhow::Result<Self> {
        let channel = cfg.channel()?;
        Ok(Self {
            distance_km: cfg.distance_km,
            ratio: cfg.ratio,
            rounds: cfg.rounds,
            eta1: channel.eta1(),
            eta2: channel.eta2(),
            variance,
            optimized,
            below_threshold,
            rate,
            plob: plob_bound(channel.eta1()).unwrap_or(f64::INFINITY),
            report,
        })
    }
}

/// Key-rate row for a single config; optimises V if the config asks for it.
pub fn key_rate_row(cfg: &SimulationConfig) -> anyhow::Result<KeyRateRow> {
    match cfg.variance {
        Variance::Fixed(v) => {
            let r = key_rates_at(cfg, v)?;
            KeyRateRow::new(cfg, v, r, false, false, configured_rate(cfg, &r))
        }
        Variance::Optimize => {
            let opt = optimize_config(cfg)?;
            KeyRateRow::new(cfg, opt.variance, opt.value, true, opt.below_threshold, opt.rate)
        }
    }
}

/// Bound row at mean photon number `n_mean` (see [`alpha_for_mean_photon`]).
pub fn bound_row(cfg: &SimulationConfig, n_mean: f64) -> anyhow::Result<BoundRow> {
    let channel = cfg.channel()?;
    let mixed = build_mixed_constellation(alpha_for_mean_photon(n_mean, cfg)?, &channel, None)?;
    let settings = BoundSettings {
        detector: cfg.detector_params(),
        rounds: BOUND_ROUNDS.to_vec(),
        truncation: cfg.truncation,
        phd: cfg.phd(),
        convention: cfg.overlap,
        seed: cfg.seed,
        ..BoundSettings::default()
    };
    let mut report = bound_report(mixed.states(), &settings)?;
    report.n_mean = n_mean;
    Ok(BoundRow {
        distance_km: cfg.distance_km,
        ratio: cfg.ratio,
        n_mean,
        report,
    })
}

/// Per-user amplitude giving mean photon number `n` in the states leaving
/// user 2, `⟨|β'_k|²⟩ = (1 + η₁/η₂)α²`.
pub fn alpha_for_mean_photon(n: f64, cfg: &SimulationConfig) -> anyhow::Result<f64> {
    if !(n > 0.0) {
        bail!("mean photon number must be > 0, got {n}");
    }
    let ch = cfg.channel()?;
    Ok((n / (1.0 + ch.eta1() / ch.eta2())).sqrt())
}

fn apply(cfg: &mut SimulationConfig, p: SweepParameter, v: f64) {
    match p {
        SweepParameter::Distance => cfg.distance_km = v,
        SweepParameter::Ratio => cfg.ratio = v,
        SweepParameter::Variance => cfg.variance = Variance::Fixed(v),
        SweepParameter::Rounds => cfg.rounds = v as usize,
        SweepParameter::MeanPhoton => {}
    }
}

/// Grid points in row order: the first spec varies slowest.
pub fn grid_points(specs: &[SweepSpec]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for spec in specs {
        let values = spec.range.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

pub fn run_sweep(cfg: &SimulationConfig, specs: &[SweepSpec]) -> anyhow::Result<SweepRows> {
    if specs.is_empty() || specs.len() > 2 {
        bail!("a sweep takes one or two parameters");
    }
    if specs.len() == 2 && specs[0].parameter == specs[1].parameter {
        bail!("the two sweep parameters must differ");
    }
    let photon = specs.iter().position(|s| s.parameter == SweepParameter::MeanPhoton);
    if photon.is_some() && specs.iter().any(|s| matches!(s.parameter, SweepParameter::Variance | SweepParameter::Rounds)) {
        bail!("mean_photon sweeps fix the amplitude and report every round count; they cannot be combined with variance or rounds");
    }
    cfg.validate()?;

    let points = grid_points(specs);
    let configured = |point: &[f64]| -> anyhow::Result<SimulationConfig> {
        let mut c = cfg.clone();
        for (spec, &v) in specs.iter().zip(point) {
            apply(&mut c, spec.parameter, v);
        }
        c.validate()?;
        Ok(c)
    };

    with_workers(|| match photon {
        Some(idx) => points
            .par_iter()
            .map(|p| bound_row(&configured(p)?, p[idx]))
            .collect::<anyhow::Result<Vec<_>>>()
            .map(SweepRows::Bound),
        None => points
            .par_iter()
            .map(|p| key_rate_row(&configured(p)?))
            .collect::<anyhow::Result<Vec<_>>>()
            .map(SweepRows::KeyRate),
    })
}

/// Run `f` on a pool sized by `CVQSS_WORKERS` when set, else rayon's default.
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let workers = std::env::var(WORKERS_ENV).ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0);
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                f()
            }
        },
        None => f(),
    }
}
