//! Modulation-variance search: a coarse grid over (0, 20] followed by a
//! golden-section refinement around the best grid point.

use serde::Serialize;

use cvqss_core::constellation::build_mixed_constellation;
use cvqss_core::security::{evaluate_key_rates, KeyRateReport};

use crate::config::{alpha_for_variance, SimulationConfig, MAX_VARIANCE};

pub const GRID_STEP: f64 = 0.25;
/// Refinement stops once the bracket is narrower than this.
pub const REFINE_TOLERANCE: f64 = 0.01;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `0.25, 0.5, …, 20`.
pub fn variance_grid() -> Vec<f64> {
    let n = (MAX_VARIANCE / GRID_STEP).round() as usize;
    (1..=n).map(|i| i as f64 * GRID_STEP).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub variance: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceOptimum<T> {
    pub variance: f64,
    /// Best objective value, or 0 when nothing on the grid was positive.
    pub rate: f64,
    pub below_threshold: bool,
    /// Evaluation at `variance`.
    pub value: T,
    /// Objective on the coarse grid.
    pub profile: Vec<ProfilePoint>,
}

/// Maximise `score(eval(V))` over `V ∈ (0, 20]`. Grid ties go to the smaller
/// V; refinement only moves away from the grid point on strict improvement.
pub fn optimize_variance<T, F, S>(mut eval: F, score: S) -> anyhow::Result<VarianceOptimum<T>>
where
    T: Clone,
    F: FnMut(f64) -> anyhow::Result<T>,
    S: Fn(&T) -> f64,
{
    let grid = variance_grid()
        .into_iter()
        .map(|v| eval(v).map(|t| (v, t)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    refine_from_grid(&grid, eval, score)
}

/// Same as [`optimize_variance`] but reuses grid evaluations, so several
/// objectives can share one pass over the grid.
pub fn refine_from_grid<T, F, S>(grid: &[(f64, T)], mut eval: F, score: S) -> anyhow::Result<VarianceOptimum<T>>
where
    T: Clone,
    F: FnMut(f64) -> anyhow::Result<T>,
    S: Fn(&T) -> f64,
{
    anyhow::ensure!(!grid.is_empty(), "empty variance grid");
    let profile: Vec<ProfilePoint> = grid
        .iter()
        .map(|(v, t)| ProfilePoint {
            variance: *v,
            rate: score(t),
        })
        .collect();
    let mut best = 0;
    for (i, p) in profile.iter().enumerate() {
        if p.rate > profile[best].rate {
            best = i;
        }
    }
    let (v0, ref t0) = grid[best];
    let r0 = profile[best].rate;
    if !(r0 > 0.0) {
        return Ok(VarianceOptimum {
            variance: v0,
            rate: 0.0,
            below_threshold: true,
            value: t0.clone(),
            profile,
        });
    }

    let mut lo = (v0 - GRID_STEP).max(REFINE_TOLERANCE);
    let mut hi = (v0 + GRID_STEP).min(MAX_VARIANCE);
    let mut champion = (v0, r0, t0.clone());
    let consider = |v: f64, t: T, r: f64, champ: &mut (f64, f64, T)| {
        if r > champ.1 {
            *champ = (v, r, t);
        }
    };

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let t1 = eval(x1)?;
    let t2 = eval(x2)?;
    let (mut f1, mut f2) = (score(&t1), score(&t2));
    consider(x1, t1, f1, &mut champion);
    consider(x2, t2, f2, &mut champion);
    while hi - lo > REFINE_TOLERANCE {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            let t = eval(x1)?;
            f1 = score(&t);
            consider(x1, t, f1, &mut champion);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            let t = eval(x2)?;
            f2 = score(&t);
            consider(x2, t, f2, &mut champion);
        }
    }
    let (variance, rate, value) = champion;
    Ok(VarianceOptimum {
        variance,
        rate,
        below_threshold: false,
        value,
        profile,
    })
}

/// Key rates for `cfg` at modulation variance `variance`.
pub fn key_rates_at(cfg: &SimulationConfig, variance: f64) -> anyhow::Result<KeyRateReport> {
    let channel = cfg.channel()?;
    let mixed = build_mixed_constellation(alpha_for_variance(variance), &channel, None)?;
    Ok(evaluate_key_rates(
        &mixed,
        &cfg.detector_params(),
        &cfg.truncation,
        &cfg.rate_options(),
    )?)
}

/// Objective selected by the config's reconciliation and post-selection.
pub fn configured_rate(cfg: &SimulationConfig, report: &KeyRateReport) -> f64 {
    report.rate(cfg.reconciliation, cfg.post_selection)
}

/// Optimise the configured rate for `cfg`; a fixed variance in the config
/// is ignored.
pub fn optimize_config(cfg: &SimulationConfig) -> anyhow::Result<VarianceOptimum<KeyRateReport>> {
    optimize_variance(|v| key_rates_at(cfg, v), |r| configured_rate(cfg, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = variance_grid();
        assert_eq!(g.len(), 80);
        assert_eq!(g[0], 0.25);
        assert_eq!(g[79], 20.0);
    }

    #[test]
    fn synthetic_peak() {
        let opt = optimize_variance(|v| Ok(-(v - 3.7) * (v - 3.7) + 1.0), |&x| x).unwrap();
        assert!((opt.variance - 3.7).abs() <= 0.01, "{}", opt.variance);
        assert!(!opt.below_threshold);
        assert!(opt.rate >= opt.profile.iter().map(|p| p.rate).fold(f64::MIN, f64::max));
    }

    #[test]
    fn flat_objective_takes_smallest_v() {
        let opt = optimize_variance(|_| Ok(0.5), |&x| x).unwrap();
        assert_eq!(opt.variance, 0.25);
        assert_eq!(opt.rate, 0.5);
    }

    #[test]
    fn non_positive_objective_is_flagged() {
        let opt = optimize_variance(|v| Ok(-v), |&x| x).unwrap();
        assert!(opt.below_threshold);
        assert_eq!(opt.rate, 0.0);
        assert_eq!(opt.variance, 0.25);
    }

    #[test]
    fn peak_at_range_end() {
        let opt = optimize_variance(|v| Ok(v), |&x| x).unwrap();
        assert_eq!(opt.variance, 20.0);
    }

    #[test]
    fn errors_propagate() {
        let r = optimize_variance(|v| if v > 5.0 { anyhow::bail!("boom") } else { Ok(v) }, |&x: &f64| x);
        assert!(r.is_err());
    }
}
