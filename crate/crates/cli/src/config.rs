//! JSON simulation config. Every field has a default, so `{}` is the
//! laboratory setup.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use cvqss_core::bounds::PhdParams;
use cvqss_core::constellation::{ChannelModel, OverlapConvention, DEFAULT_LOSS_DB_PER_KM};
use cvqss_core::sdd::{DetectorParams, TruncationPolicy};
use cvqss_core::security::{RateOptions, Reconciliation};

/// Upper end of the modulation-variance search range.
pub const MAX_VARIANCE: f64 = 20.0;

/// A fixed modulation variance `V = 2α²` or a request to optimise it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Variance {
    Fixed(f64),
    #[default]
    Optimize,
}

impl Variance {
    pub fn fixed(&self) -> Option<f64> {
        match self {
            Variance::Fixed(v) => Some(*v),
            Variance::Optimize => None,
        }
    }
}

impl fmt::Display for Variance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variance::Fixed(v) => write!(f, "{v}"),
            Variance::Optimize => f.write_str("optimize"),
        }
    }
}

impl FromStr for Variance {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if s.eq_ignore_ascii_case("optimize") {
            return Ok(Variance::Optimize);
        }
        let v: f64 = s.parse().with_context(|| format!("variance must be a number or `optimize`, got `{s}`"))?;
        Ok(Variance::Fixed(v))
    }
}

impl Serialize for Variance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Variance::Fixed(v) => s.serialize_f64(*v),
            Variance::Optimize => s.serialize_str("optimize"),
        }
    }
}

impl<'de> Deserialize<'de> for Variance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Variance::Fixed(v)),
            Raw::Text(s) if s == "optimize" => Ok(Variance::Optimize),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "variance must be a number or \"optimize\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub eta_s: f64,
    pub n_thermal: f64,
    pub visibility: f64,
    pub dark_count: f64,
    pub bs_transmittance: f64,
    pub eta_phd: f64,
    pub v_el: f64,
    pub loss_db_per_km: f64,
    pub rounds: usize,
    pub distance_km: f64,
    /// `Δ = d/D`, user 1 → user 2 distance over the total.
    pub ratio: f64,
    pub variance: Variance,
    pub reconciliation: Reconciliation,
    pub post_selection: bool,
    pub reconciliation_efficiency: f64,
    pub overlap: OverlapConvention,
    pub truncation: TruncationPolicy,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let lab = DetectorParams::laboratory(4);
        let phd = PhdParams::default();
        Self {
            eta_s: lab.eta_s,
            n_thermal: lab.n_thermal,
            visibility: lab.visibility,
            dark_count: lab.dark_count,
            bs_transmittance: lab.bs_transmittance,
            eta_phd: phd.eta_phd,
            v_el: phd.v_el,
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
            rounds: 4,
            distance_km: 20.0,
            ratio: 0.5,
            variance: Variance::Optimize,
            reconciliation: Reconciliation::Rr,
            post_selection: false,
            reconciliation_efficiency: 1.0,
            overlap: OverlapConvention::Modulus,
            truncation: TruncationPolicy::default(),
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("malformed config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.detector_params().validate()?;
        self.phd().validate()?;
        self.truncation.validate()?;
        self.channel()?;
        if let Variance::Fixed(v) = self.variance {
            if !(v > 0.0 && v <= MAX_VARIANCE) {
                bail!("variance must lie in (0, {MAX_VARIANCE}], got {v}");
            }
        }
        if !(self.reconciliation_efficiency > 0.0 && self.reconciliation_efficiency <= 1.0) {
            bail!("reconciliation_efficiency must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn detector_params(&self) -> DetectorParams {
        DetectorParams {
            rounds: self.rounds,
            eta_s: self.eta_s,
            n_thermal: self.n_thermal,
            visibility: self.visibility,
            dark_count: self.dark_count,
            bs_transmittance: self.bs_transmittance,
        }
    }

    pub fn phd(&self) -> PhdParams {
        PhdParams {
            eta_phd: self.eta_phd,
            v_el: self.v_el,
        }
    }

    pub fn channel(&self) -> anyhow::Result<ChannelModel> {
        Ok(ChannelModel::new(self.distance_km, self.ratio, self.loss_db_per_km)?)
    }

    pub fn rate_options(&self) -> RateOptions {
        RateOptions {
            convention: self.overlap,
            reconciliation_efficiency: self.reconciliation_efficiency,
        }
    }
}

/// `α = √(V/2)`.
pub fn alpha_for_variance(variance: f64) -> f64 {
    (variance / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(SimulationConfig::from_json("{}").unwrap(), SimulationConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = SimulationConfig::default();
        cfg.variance = Variance::Fixed(3.5);
        cfg.reconciliation = Reconciliation::Dr;
        cfg.overlap = OverlapConvention::Full;
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(SimulationConfig::from_json(&text).unwrap(), cfg);
        let text = serde_json::to_string(&SimulationConfig::default()).unwrap();
        assert!(text.contains("\"variance\":\"optimize\""));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SimulationConfig::from_json(r#"{"typo": 1}"#).is_err());
        assert!(SimulationConfig::from_json(r#"{"variance": 25}"#).is_err());
        assert!(SimulationConfig::from_json(r#"{"variance": "max"}"#).is_err());
        assert!(SimulationConfig::from_json(r#"{"ratio": 1.0}"#).is_err());
        assert!(SimulationConfig::from_json(r#"{"rounds": 0}"#).is_err());
        assert!(SimulationConfig::from_json("[").is_err());
    }

    #[test]
    fn variance_parsing() {
        assert_eq!("optimize".parse::<Variance>().unwrap(), Variance::Optimize);
        assert_eq!("2.5".parse::<Variance>().unwrap(), Variance::Fixed(2.5));
        assert!("x".parse::<Variance>().is_err());
    }
}
