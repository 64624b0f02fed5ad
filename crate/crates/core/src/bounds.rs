//! Benchmark error probabilities (SQL, Helstrom, practical heterodyne),
//! the PLOB capacity and the improvement ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constellation::{gram_matrix, ComplexAmplitude, Constellation, OverlapConvention};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::sdd::{error_probability_sdd, DetectorParams, TruncationPolicy};
use crate::security::CLAMP_THRESHOLD;

/// Distances closer than this are treated as equal.
const DISTANCE_TIE: f64 = 1e-9;
/// Points closer than this coincide.
const COINCIDENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Corner,
    Edge,
    Internal,
}

/// Nearest-neighbour distances and region labels of a constellation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqlGeometry {
    pub e1: f64,
    pub e2: f64,
    pub regions: Vec<Region>,
}

impl SqlGeometry {
    pub fn count(&self, region: Region) -> usize {
        self.regions.iter().filter(|&&r| r == region).count()
    }
}

/// Neighbours are Gabriel-graph edges: `a` and `b` are adjacent when no
/// third point lies in the closed disk with diameter `ab`.
fn gabriel_neighbours(points: &[ComplexAmplitude]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mid = (points[i] + points[j]) * 0.5;
            let r2 = (points[i] - points[j]).norm_sqr() * 0.25;
            let blocked = (0..n)
                .filter(|&k| k != i && k != j)
                .any(|k| (points[k] - mid).norm_sqr() <= r2 * (1.0 + 1e-9));
            if !blocked {
                edges.push((i, j, (points[i] - points[j]).norm()));
            }
        }
    }
    edges
}

pub fn sql_geometry(constellation: &Constellation) -> Result<SqlGeometry> {
    let pts = constellation.points();
    let n = pts.len();
    if n < 2 {
        return Err(Error::invalid("constellation", "need at least two points"));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (pts[i] - pts[j]).norm() <= COINCIDENT {
                return Err(Error::DegenerateConstellation { first: i, second: j });
            }
        }
    }
    let edges = gabriel_neighbours(pts);
    let e1 = edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let e2 = edges
        .iter()
        .map(|e| e.2)
        .filter(|&d| d > e1 + DISTANCE_TIE)
        .fold(f64::INFINITY, f64::min);
    let e2 = if e2.is_finite() { e2 } else { e1 };

    let mut degree = vec![0usize; n];
    for &(i, j, d) in &edges {
        if (d - e1).abs() <= DISTANCE_TIE || (d - e2).abs() <= DISTANCE_TIE {
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    let regions = degree
        .into_iter()
        .map(|d| match d {
            0..=2 => Region::Corner,
            3 => Region::Edge,
            _ => Region::Internal,
        })
        .collect();
    Ok(SqlGeometry { e1, e2, regions })
}

/// `½·erfc(E/2)`: probability of mistaking a point for a neighbour at
/// distance `E`.
pub fn pairwise_error(distance: f64) -> f64 {
    0.5 * libm::erfc(distance / 2.0)
}

fn region_error(region: Region, p1: f64, p2: f64) -> f64 {
    match region {
        Region::Corner => 2.0 * p1 - p1 * p1,
        Region::Edge => 2.0 * p1 + p2 - (p1 + p2) * p1,
        Region::Internal => 2.0 * (p1 + p2) - (p1 + p2).powi(2),
    }
}

fn region_sum(geometry: &SqlGeometry, priors: &[f64], e1: f64, e2: f64) -> f64 {
    let (p1, p2) = (pairwise_error(e1), pairwise_error(e2));
    geometry
        .regions
        .iter()
        .zip(priors)
        .map(|(&r, p)| p * region_error(r, p1, p2))
        .sum()
}

pub fn sql_error_probability(geometry: &SqlGeometry, priors: &[f64]) -> f64 {
    region_sum(geometry, priors, geometry.e1, geometry.e2)
}

/// Brute-force SQL: each quadrature gets Gaussian noise of variance ½ and
/// the receiver picks the nearest point.
pub fn sql_error_monte_carlo(constellation: &Constellation, samples: u64, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    let pts = constellation.points();
    let priors = constellation.priors();
    let noise = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0u64;
    for _ in 0..samples {
        let u: f64 = rng.random();
        let k = crate::sdd::sample_state(priors, u);
        let y = pts[k] + ComplexAmplitude::new(noise.sample(&mut rng), noise.sample(&mut rng));
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, p) in pts.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        errors += u64::from(best != k);
    }
    Ok(errors as f64 / samples as f64)
}

/// Square-root-measurement estimate of the minimum error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HelstromBound {
    pub probability: f64,
    /// Eigenvalues of the Gram matrix, ascending.
    pub eigenvalues: Vec<f64>,
}

/// `1 - (Σ√λ)²/N` with `λ` the spectrum of `D^½ G D^½`, `D = diag(p)`.
/// For equal priors this is `1 - (Σ√ω)²/N²` over the Gram eigenvalues `ω`.
pub fn helstrom_bound(constellation: &Constellation, convention: OverlapConvention) -> Result<HelstromBound> {
    let pts = constellation.points();
    let n = pts.len();
    let g = gram_matrix(pts, convention);
    let eigenvalues = checked_spectrum(&g, n)?;

    let roots: Vec<f64> = constellation.priors().iter().map(|p| p.sqrt()).collect();
    let mut weighted = g;
    for k in 0..n {
        for m in 0..n {
            weighted[k * n + m] *= roots[k] * roots[m];
        }
    }
    let lambda = checked_spectrum(&weighted, n)?;
    // √ amplifies round-off in the null space; drop it below numerical rank
    let floor = n as f64 * f64::EPSILON * lambda.last().copied().unwrap_or(0.0);
    let s: f64 = lambda.iter().filter(|&&l| l > floor).map(|l| l.sqrt()).sum();
    Ok(HelstromBound {
        probability: (1.0 - s * s / n as f64).clamp(0.0, 1.0),
        eigenvalues,
    })
}

fn checked_spectrum(matrix: &[num_complex::Complex64], n: usize) -> Result<Vec<f64>> {
    let eig = hermitian_eigenvalues(matrix, n, 1e-15)?;
    if let Some(&lo) = eig.first() {
        if lo < CLAMP_THRESHOLD {
            return Err(Error::ConventionInconsistency { value: lo });
        }
    }
    Ok(eig.into_iter().map(|x| x.max(0.0)).collect())
}

/// Practical heterodyne detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhdParams {
    pub eta_phd: f64,
    pub v_el: f64,
}

impl PhdParams {
    pub fn new(eta_phd: f64, v_el: f64) -> Result<Self> {
        let p = Self { eta_phd, v_el };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_phd > 0.0 && self.eta_phd <= 1.0) {
            return Err(Error::invalid("eta_phd", "must lie in (0, 1]"));
        }
        if !(self.v_el >= 0.0 && self.v_el.is_finite()) {
            return Err(Error::invalid("v_el", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Factor applied to every decision distance.
    pub fn distance_scale(&self) -> f64 {
        (self.eta_phd / (1.0 + self.v_el)).sqrt()
    }
}

impl Default for PhdParams {
    fn default() -> Self {
        Self {
            eta_phd: 0.72,
            v_el: 0.01,
        }
    }
}

pub fn phd_error_probability(geometry: &SqlGeometry, phd: &PhdParams, priors: &[f64]) -> f64 {
    let s = phd.distance_scale();
    region_sum(geometry, priors, geometry.e1 * s, geometry.e2 * s)
}

/// Repeaterless secret-key capacity `-log₂(1-η)`.
pub fn plob_bound(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid("eta", "must lie in [0, 1)"));
    }
    Ok(-(-eta).ln_1p() / std::f64::consts::LN_2)
}

/// `δ = -(p_e - p_sql)/(1 - p_sql)`; positive when `p_e` beats the SQL.
pub fn improvement_ratio(p_e: f64, p_sql: f64) -> Result<f64> {
    if p_sql >= 1.0 {
        return Err(Error::invalid("p_sql", "must be < 1"));
    }
    Ok(-(p_e - p_sql) / (1.0 - p_sql))
}

/// Settings shared by every point of a bounds sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSettings {
    pub detector: DetectorParams,
    /// SDD round counts to evaluate; `detector.rounds` is ignored.
    pub rounds: Vec<usize>,
    pub truncation: TruncationPolicy,
    pub phd: PhdParams,
    pub convention: OverlapConvention,
    /// Used by the Monte Carlo SQL fallback on degenerate geometries.
    pub fallback_samples: u64,
    pub seed: u64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            detector: DetectorParams::laboratory(4),
            rounds: vec![1, 2, 3, 4],
            truncation: TruncationPolicy::default(),
            phd: PhdParams::default(),
            convention: OverlapConvention::Modulus,
            fallback_samples: 200_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n_mean: f64,
    pub p_sql: f64,
    pub p_helstrom: f64,
    pub p_phd: f64,
    /// One entry per `rounds` value in the settings.
    pub p_sdd: Vec<f64>,
    pub delta_sdd: Vec<f64>,
    pub delta_phd: f64,
    pub helstrom_eigenvalues: Vec<f64>,
    /// The SQL came from the Monte Carlo integrator; `p_phd` is then NaN.
    pub sql_fallback: bool,
}

pub fn bound_report(constellation: &Constellation, settings: &BoundSettings) -> Result<BoundReport> {
    settings.phd.validate()?;
    let priors = constellation.priors();
    let (p_sql, p_phd, fallback) = match sql_geometry(constellation) {
        Ok(geom) => (
            sql_error_probability(&geom, priors),
            phd_error_probability(&geom, &settings.phd, priors),
            false,
        ),
        Err(Error::DegenerateConstellation { .. }) => {
            let p = sql_error_monte_carlo(constellation, settings.fallback_samples, settings.seed)?;
            log::warn!("degenerate geometry, SQL estimated by Monte Carlo: {p:.4e}");
            (p, f64::NAN, true)
        }
        Err(e) => return Err(e),
    };
    let helstrom = helstrom_bound(constellation, settings.convention)?;
    let p_sdd = settings
        .rounds
        .iter()
        .map(|&m| {
            let params = settings.detector.clone().with_rounds(m);
            error_probability_sdd(constellation, &params, &settings.truncation).map(|e| e.probability)
        })
        .collect::<Result<Vec<_>>>()?;
    let delta_sdd = p_sdd
        .iter()
        .map(|&p| improvement_ratio(p, p_sql))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        n_mean: constellation.mean_photon_number(),
        p_sql,
        p_helstrom: helstrom.probability,
        p_phd,
        p_sdd,
        delta_sdd,
        delta_phd: improvement_ratio(p_phd, p_sql)?,
        helstrom_eigenvalues: helstrom.eigenvalues,
        sql_fallback: fallback,
    })
}
