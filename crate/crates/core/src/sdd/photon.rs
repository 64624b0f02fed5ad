use crate::constellation::ComplexAmplitude;

use super::DetectorParams;

/// Mean photon number of one branch after displacement,
/// `|β|²/M + |γ|² - (2/√M)·ξ·|β||γ|·cos(arg β - arg γ)`.
///
/// The displacement subtracts `γ`, so `γ = β/√M` with `ξ = 1` nulls the
/// branch.
pub fn mean_photon_number(
    beta: ComplexAmplitude,
    gamma: ComplexAmplitude,
    visibility: f64,
    rounds: usize,
) -> f64 {
    let root_m = (rounds as f64).sqrt();
    // |β/√M - γ|² plus the visibility correction; exact zero when nulled
    let residual = (beta / root_m - gamma).norm_sqr();
    let n = residual + 2.0 / root_m * (1.0 - visibility) * (beta * gamma.conj()).re;
    n.max(0.0)
}

/// Photon-count distribution `P(n | β, γ)` for `n = 0..=n_max`.
///
/// Displaced thermal state with thermal occupation `N_t`, read out with
/// efficiency `η_s`; the coherent part carries `ζN̄ + ν` photons. For
/// `N_t > 0` the Laguerre factor is folded into `q_n = r^n L_n(-x)` with
/// `r = η_sN_t/(η_sN_t+1)` so that the three-term recurrence runs on
/// Poisson-sized numbers. `N_t = 0` is the Poisson limit.
pub fn detection_pmf(
    beta: ComplexAmplitude,
    gamma: ComplexAmplitude,
    params: &DetectorParams,
    n_max: usize,
) -> Vec<f64> {
    let nbar = mean_photon_number(beta, gamma, params.visibility, params.rounds);
    signal_pmf(params.bs_transmittance * nbar + params.dark_count, params, n_max)
}

/// `P(n)` for a coherent part of `mu` photons before detection.
pub(crate) fn signal_pmf(mu: f64, params: &DetectorParams, n_max: usize) -> Vec<f64> {
    let eta = params.eta_s;
    let nt = params.n_thermal;
    let mut pmf = Vec::with_capacity(n_max + 1);

    if nt == 0.0 {
        let lambda = eta * mu;
        let mut p = (-lambda).exp();
        pmf.push(p);
        for n in 0..n_max {
            p *= lambda / (n + 1) as f64;
            pmf.push(p);
        }
        return pmf;
    }

    let thermal = eta * nt;
    let r = thermal / (thermal + 1.0);
    let x = mu / (nt * (thermal + 1.0));
    let prefactor = (-mu / (nt + 1.0 / eta)).exp() / (thermal + 1.0);

    let mut q_prev = 1.0;
    pmf.push(prefactor);
    if n_max == 0 {
        return pmf;
    }
    let mut q = r * (1.0 + x);
    pmf.push(prefactor * q);
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + x) * r * q - nf * r * r * q_prev) / (nf + 1.0);
        q_prev = q;
        q = next;
        pmf.push(prefactor * q);
    }
    pmf
}

/// `P(n | β, γ)` for a single count.
pub fn detection_probability(
    n: usize,
    beta: ComplexAmplitude,
    gamma: ComplexAmplitude,
    params: &DetectorParams,
) -> f64 {
    detection_pmf(beta, gamma, params, n)[n]
}
