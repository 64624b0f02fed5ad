use serde::{Deserialize, Serialize};

use crate::constellation::{ComplexAmplitude, Constellation};
use crate::error::{Error, Result};

use super::{detection_probability, DetectorParams};

const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// Probability distribution over the candidate states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable(Vec<f64>);

impl PosteriorTable {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("posterior", "empty distribution"));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("posterior", "entries must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid("posterior", format!("must sum to 1, got {total}")));
        }
        Ok(Self(probabilities))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, k: usize) -> Self {
        let mut p = vec![0.0; n];
        p[k] = 1.0;
        Self(p)
    }

    pub fn from_constellation(c: &Constellation) -> Self {
        Self(c.priors().to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Result of a single Bayesian update.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesOutcome {
    pub posterior: PosteriorTable,
    /// Every prior-weighted likelihood was zero; the prior was returned
    /// unchanged.
    pub underflow: bool,
}

/// Posterior `∝ prior[k] · likelihood[k]`.
pub fn bayes_update_with_likelihoods(prior: &PosteriorTable, likelihoods: &[f64]) -> BayesOutcome {
    assert_eq!(prior.len(), likelihoods.len(), "one likelihood per state");
    let weighted: Vec<f64> = prior.0.iter().zip(likelihoods).map(|(p, l)| p * l).collect();
    let total: f64 = weighted.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return BayesOutcome {
            posterior: prior.clone(),
            underflow: true,
        };
    }
    BayesOutcome {
        posterior: PosteriorTable(weighted.into_iter().map(|w| w / total).collect()),
        underflow: false,
    }
}

/// Update after observing `n` photons on a branch displaced by `gamma`.
pub fn bayes_update(
    prior: &PosteriorTable,
    n: usize,
    gamma: ComplexAmplitude,
    constellation: &Constellation,
    params: &DetectorParams,
) -> BayesOutcome {
    let likelihoods: Vec<f64> = constellation
        .points()
        .iter()
        .map(|&beta| detection_probability(n, beta, gamma, params))
        .collect();
    bayes_update_with_likelihoods(prior, &likelihoods)
}

/// Index of the most probable state; ties go to the lowest index.
pub fn map_select(posterior: &PosteriorTable) -> usize {
    argmax(&posterior.0)
}

/// Relative gap below which two candidates count as tied. Symmetric states
/// have equal posteriors up to rounding, and the tie rule must not depend on
/// whether they were accumulated as products or as log sums.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

/// Argmax of nonnegative weights; near-ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] * (1.0 + TIE_TOLERANCE) {
            best = k;
        }
    }
    best
}

/// Argmax of log weights, with the same tie rule as [`argmax`].
pub(crate) fn argmax_log(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] + TIE_TOLERANCE {
            best = k;
        }
    }
    best
}
