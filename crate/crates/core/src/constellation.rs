//! Coherent-state sources, the lossy channel and the constellations seen by
//! the dealer and by the eavesdropper.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex field amplitude in shot-noise units.
pub type ComplexAmplitude = Complex64;

/// Default fiber attenuation in dB/km.
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

/// Number of states in the dealer-side mixed constellation.
pub const MIXED_STATES: usize = 16;

const PRIOR_TOLERANCE: f64 = 1e-9;

/// Phase `(2k+1)π/4` of the `k`-th QPSK symbol.
pub fn qpsk_phase(k: usize) -> f64 {
    (2 * k + 1) as f64 * FRAC_PI_4
}

/// Four coherent states `α·exp(i(2k+1)π/4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpskSource {
    alpha: f64,
    symbols: [ComplexAmplitude; 4],
}

impl QpskSource {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn symbols(&self) -> &[ComplexAmplitude; 4] {
        &self.symbols
    }

    pub fn symbol(&self, k: usize) -> ComplexAmplitude {
        self.symbols[k]
    }
}

pub fn build_qpsk(alpha: f64) -> Result<QpskSource> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid("alpha", format!("must be finite and >= 0, got {alpha}")));
    }
    let symbols = std::array::from_fn(|k| Complex64::from_polar(alpha, qpsk_phase(k)));
    Ok(QpskSource { alpha, symbols })
}

/// Fiber transmittance `10^(-a·D/10)`.
pub fn channel_transmittance(distance_km: f64, loss_db_per_km: f64) -> Result<f64> {
    if !distance_km.is_finite() || distance_km < 0.0 {
        return Err(Error::invalid("distance_km", format!("must be >= 0, got {distance_km}")));
    }
    if !loss_db_per_km.is_finite() || loss_db_per_km <= 0.0 {
        return Err(Error::invalid(
            "loss_db_per_km",
            format!("must be > 0, got {loss_db_per_km}"),
        ));
    }
    Ok(10f64.powf(-loss_db_per_km * distance_km / 10.0))
}

/// Physical layout of the chain user 1 → user 2 → dealer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Distance from user 1 to the dealer.
    pub total_distance_km: f64,
    /// Distance user 1 → user 2 divided by the total distance.
    pub ratio: f64,
    pub loss_db_per_km: f64,
}

/// Transmittances seen by the two users' signals on their way to the dealer.
///
/// `eta1` is the user 1 → dealer transmittance and `eta2` the user 2 → dealer
/// one, so `0 < eta1 <= eta2 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    eta1: f64,
    eta2: f64,
    geometry: Option<LinkGeometry>,
}

impl ChannelModel {
    pub fn new(total_distance_km: f64, ratio: f64, loss_db_per_km: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid("ratio", format!("must lie in (0, 1), got {ratio}")));
        }
        let eta1 = channel_transmittance(total_distance_km, loss_db_per_km)?;
        let eta2 = channel_transmittance((1.0 - ratio) * total_distance_km, loss_db_per_km)?;
        Ok(Self {
            eta1,
            eta2,
            geometry: Some(LinkGeometry {
                total_distance_km,
                ratio,
                loss_db_per_km,
            }),
        })
    }

    /// Channel given directly by its two transmittances.
    pub fn from_transmittances(eta1: f64, eta2: f64) -> Result<Self> {
        if !(eta1 > 0.0 && eta1 <= 1.0) {
            return Err(Error::invalid("eta1", format!("must lie in (0, 1], got {eta1}")));
        }
        if !(eta2 > 0.0 && eta2 <= 1.0) {
            return Err(Error::invalid("eta2", format!("must lie in (0, 1], got {eta2}")));
        }
        if eta1 > eta2 {
            return Err(Error::invalid(
                "eta1",
                format!("user 1 cannot be closer to the dealer than user 2 ({eta1} > {eta2})"),
            ));
        }
        Ok(Self {
            eta1,
            eta2,
            geometry: None,
        })
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    pub fn geometry(&self) -> Option<&LinkGeometry> {
        self.geometry.as_ref()
    }
}

/// A finite set of candidate coherent states with prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    points: Vec<ComplexAmplitude>,
    priors: Vec<f64>,
}

impl Constellation {
    /// Candidate states with uniform priors.
    pub fn uniform(points: Vec<ComplexAmplitude>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn new(points: Vec<ComplexAmplitude>, priors: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("points", "constellation is empty"));
        }
        if points.len() > u8::MAX as usize {
            return Err(Error::invalid("points", "at most 255 states are supported"));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::invalid("points", "amplitudes must be finite"));
        }
        validate_priors(&priors, points.len())?;
        Ok(Self { points, priors })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ComplexAmplitude] {
        &self.points
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Mean photon number `Σ p_k |β_k|²`.
    pub fn mean_photon_number(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.priors)
            .map(|(b, p)| p * b.norm_sqr())
            .sum()
    }
}

fn validate_priors(priors: &[f64], expected: usize) -> Result<()> {
    if priors.len() != expected {
        return Err(Error::invalid(
            "priors",
            format!("expected {expected} entries, got {}", priors.len()),
        ));
    }
    if priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("priors", "entries must be finite and nonnegative"));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > PRIOR_TOLERANCE {
        return Err(Error::invalid("priors", format!("must sum to 1, got {total}")));
    }
    Ok(())
}

/// The 16 states `√η₁·α_{k₁} + √η₂·α_{k₂}` received by the dealer, indexed
/// `k = 4k₁ + k₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedConstellation {
    alpha: f64,
    channel: ChannelModel,
    states: Constellation,
}

impl MixedConstellation {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn betas(&self) -> &[ComplexAmplitude] {
        self.states.points()
    }

    pub fn priors(&self) -> &[f64] {
        self.states.priors()
    }

    pub fn states(&self) -> &Constellation {
        &self.states
    }
}

impl AsRef<Constellation> for MixedConstellation {
    fn as_ref(&self) -> &Constellation {
        &self.states
    }
}

/// Split a mixed-state index into the two users' QPSK indices `(k₁, k₂)`.
pub fn split_index(k: usize) -> (usize, usize) {
    (k / 4, k % 4)
}

fn two_source_sum(alpha: f64, weight1: f64, weight2: f64) -> Vec<ComplexAmplitude> {
    (0..MIXED_STATES)
        .map(|k| {
            let (k1, k2) = split_index(k);
            Complex64::from_polar(weight1 * alpha, qpsk_phase(k1))
                + Complex64::from_polar(weight2 * alpha, qpsk_phase(k2))
        })
        .collect()
}

/// Build the dealer-side constellation. `priors = None` selects the uniform
/// distribution.
pub fn build_mixed_constellation(
    alpha: f64,
    channel: &ChannelModel,
    priors: Option<&[f64]>,
) -> Result<MixedConstellation> {
    build_qpsk(alpha)?;
    let betas = two_source_sum(alpha, channel.eta1.sqrt(), channel.eta2.sqrt());
    let priors = match priors {
        Some(p) => p.to_vec(),
        None => vec![1.0 / MIXED_STATES as f64; MIXED_STATES],
    };
    Ok(MixedConstellation {
        alpha,
        channel: *channel,
        states: Constellation::new(betas, priors)?,
    })
}

/// States `ε_k` tapped by a beam splitter on the user 2 → dealer hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveConstellation {
    epsilons: Vec<ComplexAmplitude>,
}

impl EveConstellation {
    pub fn epsilons(&self) -> &[ComplexAmplitude] {
        &self.epsilons
    }
}

pub fn build_eve_constellation(alpha: f64, channel: &ChannelModel) -> Result<EveConstellation> {
    build_qpsk(alpha)?;
    let (eta1, eta2) = (channel.eta1, channel.eta2);
    if eta2 <= 0.0 {
        return Err(Error::invalid("eta2", "must be > 0"));
    }
    let leak = 1.0 - eta2;
    let w1 = (leak * eta1 / eta2).sqrt();
    let w2 = leak.sqrt();
    Ok(EveConstellation {
        epsilons: two_source_sum(alpha, w1, w2),
    })
}

/// How the overlap `⟨a|b⟩` between coherent states is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapConvention {
    /// Real overlap `exp(-|a-b|²/2)`.
    #[default]
    Modulus,
    /// Full complex overlap `exp(-|a|²/2 - |b|²/2 + a*·b)`.
    Full,
}

impl std::str::FromStr for OverlapConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modulus" => Ok(Self::Modulus),
            "full" => Ok(Self::Full),
            other => Err(Error::invalid(
                "overlap",
                format!("expected `modulus` or `full`, got `{other}`"),
            )),
        }
    }
}

pub fn coherent_overlap(
    a: ComplexAmplitude,
    b: ComplexAmplitude,
    convention: OverlapConvention,
) -> Complex64 {
    match convention {
        OverlapConvention::Modulus => Complex64::new((-0.5 * (a - b).norm_sqr()).exp(), 0.0),
        OverlapConvention::Full => {
            (-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b).exp()
        }
    }
}

/// Overlap matrix `G[k][m] = ⟨a_k|a_m⟩`, row-major.
pub fn gram_matrix(points: &[ComplexAmplitude], convention: OverlapConvention) -> Vec<Complex64> {
    let n = points.len();
    let mut g = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        g[k * n + k] = Complex64::new(1.0, 0.0);
        for m in (k + 1)..n {
            let v = coherent_overlap(points[k], points[m], convention);
            g[k * n + m] = v;
            g[m * n + k] = v.conj();
        }
    }
    g
}
