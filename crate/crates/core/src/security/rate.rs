use serde::Serialize;

use crate::sdd::{Leaf, OutcomeTree};

use super::entropy::shannon_entropy;

/// Discarded mass above which mutual-information results are flagged.
pub const LOW_PRECISION_MASS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MutualInformation {
    pub i_ud: f64,
    pub h_u: f64,
    pub h_u_given_d: f64,
    pub discarded_mass: f64,
    pub low_precision: bool,
}

/// `I(U;D) = H(U) - H(U|D)` with `D` the full photon-count path.
pub fn mutual_information_iud(tree: &OutcomeTree) -> MutualInformation {
    let h_u = shannon_entropy(tree.priors());
    let mut post = vec![0.0; tree.n_states()];
    let mut h_cond = 0.0;
    for leaf in tree.leaves() {
        leaf.posterior_into(&mut post);
        h_cond += leaf.probability() * shannon_entropy(&post);
    }
    let discarded = tree.discarded_mass();
    if discarded > LOW_PRECISION_MASS {
        log::warn!("mutual information computed with {discarded:.2e} discarded mass");
    }
    MutualInformation {
        i_ud: h_u - h_cond,
        h_u,
        h_u_given_d: h_cond,
        discarded_mass: discarded,
        low_precision: discarded > LOW_PRECISION_MASS,
    }
}

/// `H(U) - H(U | path)` for one posterior.
pub fn per_outcome_mutual_information(posterior: &[f64], priors: &[f64]) -> f64 {
    shannon_entropy(priors) - shannon_entropy(posterior)
}

pub fn leaf_mutual_information(leaf: &Leaf<'_>, priors: &[f64]) -> f64 {
    per_outcome_mutual_information(&leaf.posterior(), priors)
}

/// `I_UD - χ`. Negative values are returned as-is.
pub fn key_rate(i_ud: f64, chi: f64) -> f64 {
    i_ud - chi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PostSelectedRate {
    pub rate: f64,
    /// Probability mass of the kept outcomes.
    pub retained_fraction: f64,
}

/// Keep only paths whose own rate `β·I_UD(path) - χ` is positive.
pub fn key_rate_post_selected(tree: &OutcomeTree, chi: f64, efficiency: f64) -> PostSelectedRate {
    let h_u = shannon_entropy(tree.priors());
    let mut post = vec![0.0; tree.n_states()];
    let mut rate = 0.0;
    let mut kept = 0.0;
    for leaf in tree.leaves() {
        leaf.posterior_into(&mut post);
        let gain = efficiency * (h_u - shannon_entropy(&post)) - chi;
        if gain > 0.0 {
            rate += leaf.probability() * gain;
            kept += leaf.probability();
        }
    }
    PostSelectedRate {
        rate,
        retained_fraction: kept,
    }
}
