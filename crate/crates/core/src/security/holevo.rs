use serde::Serialize;

use crate::constellation::{EveConstellation, OverlapConvention};
use crate::error::{Error, Result};
use crate::sdd::OutcomeTree;

use super::entropy::SpanDensityOperator;

/// Holevo quantity between the sender's symbol and Eve's tapped modes.
///
/// Each conditional state `|ε_k⟩` is pure, so `χ_UE = S(ρ_E)`.
pub fn holevo_dr(eve: &EveConstellation, priors: &[f64], convention: OverlapConvention) -> Result<f64> {
    let op = SpanDensityOperator::new(priors, eve.epsilons(), convention)?;
    Ok(op.entropy())
}

/// `J[k][j] = P(sender sent k, dealer decided j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDecisionDistribution {
    n_states: usize,
    priors: Vec<f64>,
    joint: Vec<f64>,
    discarded_mass: f64,
}

impl JointDecisionDistribution {
    pub fn from_tree(tree: &OutcomeTree) -> Self {
        let n = tree.n_states();
        let priors = tree.priors().to_vec();
        let mut joint = vec![0.0; n * n];
        for leaf in tree.leaves() {
            let j = leaf.decision();
            for (k, ll) in leaf.log_likelihoods().iter().enumerate() {
                joint[k * n + j] += priors[k] * ll.exp();
            }
        }
        Self {
            n_states: n,
            priors,
            joint,
            discarded_mass: tree.discarded_mass(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.joint[k * self.n_states + j]
    }

    /// Row-major `n × n` matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.joint
    }

    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    /// Unnormalised `P(j)`; the column sums.
    pub fn decision_marginals(&self) -> Vec<f64> {
        let n = self.n_states;
        (0..n).map(|j| (0..n).map(|k| self.get(k, j)).sum()).collect()
    }

    pub fn state_marginals(&self) -> Vec<f64> {
        self.joint.chunks(self.n_states).map(|row| row.iter().sum()).collect()
    }
}

pub fn joint_decision_distribution(tree: &OutcomeTree) -> JointDecisionDistribution {
    JointDecisionDistribution::from_tree(tree)
}

/// Holevo quantity between the dealer's decision and Eve's modes,
/// `S(ρ_E) - Σ_j P(j) S(ρ_{E|j})`.
///
/// `P(j)` is renormalised over the enumerated mass.
pub fn holevo_rr(
    joint: &JointDecisionDistribution,
    eve: &EveConstellation,
    convention: OverlapConvention,
) -> Result<f64> {
    let n = joint.n_states();
    if eve.epsilons().len() != n {
        return Err(Error::invalid("eve", "state count differs from the decision table"));
    }
    let s_e = SpanDensityOperator::new(joint.priors(), eve.epsilons(), convention)?.entropy();
    let marginals = joint.decision_marginals();
    let total: f64 = marginals.iter().sum();
    let mut conditional = 0.0;
    let mut weights = vec![0.0; n];
    for (j, &pj) in marginals.iter().enumerate() {
        if pj <= 0.0 {
            continue;
        }
        for (k, w) in weights.iter_mut().enumerate() {
            *w = joint.get(k, j) / pj;
        }
        // absorb rounding so the weights sum to one exactly enough
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        let op = SpanDensityOperator::new(&weights, eve.epsilons(), convention)?;
        conditional += pj / total * op.entropy();
    }
    Ok((s_e - conditional).max(0.0))
}
