use num_complex::Complex64;
use serde::Serialize;

use crate::constellation::{coherent_overlap, ComplexAmplitude, OverlapConvention};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;

/// Eigenvalues below this (before clamping) signal an overlap matrix that is
/// not positive semidefinite.
pub const CLAMP_THRESHOLD: f64 = -1e-9;
const EIGEN_TOLERANCE: f64 = 1e-12;

/// Base-2 Shannon entropy with `0·log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

/// Binary entropy `h₂(x)`.
pub fn binary_entropy(x: f64) -> f64 {
    shannon_entropy(&[x, 1.0 - x])
}

/// Mixture `Σ c_k |a_k⟩⟨a_k|` of coherent states, diagonalised on the span
/// of its components.
///
/// The nonzero spectrum of the mixture equals that of
/// `D^{1/2} G D^{1/2}` with `D = diag(c)` and `G` the overlap matrix of the
/// components, so everything stays in a space of dimension `len(c)`.
#[derive(Debug, Clone, Serialize)]
pub struct SpanDensityOperator {
    weights: Vec<f64>,
    amplitudes: Vec<ComplexAmplitude>,
    convention: OverlapConvention,
    spectrum: Vec<f64>,
    /// Most negative eigenvalue seen before clamping.
    min_raw_eigenvalue: f64,
}

impl SpanDensityOperator {
    pub fn new(
        weights: &[f64],
        amplitudes: &[ComplexAmplitude],
        convention: OverlapConvention,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 || amplitudes.len() != n {
            return Err(Error::invalid("weights", "need one weight per amplitude"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
        }

        let roots: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            a[k * n + k] = Complex64::new(weights[k], 0.0);
            for m in (k + 1)..n {
                let v = coherent_overlap(amplitudes[k], amplitudes[m], convention) * (roots[k] * roots[m]);
                a[k * n + m] = v;
                a[m * n + k] = v.conj();
            }
        }
        let raw = hermitian_eigenvalues(&a, n, EIGEN_TOLERANCE)?;
        let min_raw = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_raw < CLAMP_THRESHOLD {
            return Err(Error::ConventionInconsistency { value: min_raw });
        }
        if min_raw < 0.0 {
            log::debug!("clamped eigenvalue {min_raw:e} to zero");
        }
        let mut spectrum: Vec<f64> = raw.into_iter().map(|x| x.max(0.0)).collect();
        let sum: f64 = spectrum.iter().sum();
        spectrum.iter_mut().for_each(|x| *x /= sum);

        Ok(Self {
            weights: weights.to_vec(),
            amplitudes: amplitudes.to_vec(),
            convention,
            spectrum,
            min_raw_eigenvalue: min_raw,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn amplitudes(&self) -> &[ComplexAmplitude] {
        &self.amplitudes
    }

    pub fn convention(&self) -> OverlapConvention {
        self.convention
    }

    /// Clamped, renormalised eigenvalues in ascending order.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn min_raw_eigenvalue(&self) -> f64 {
        self.min_raw_eigenvalue
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.spectrum)
    }
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(op: &SpanDensityOperator) -> f64 {
    op.entropy()
}
