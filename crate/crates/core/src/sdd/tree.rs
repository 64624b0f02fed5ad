use serde::Serialize;

use crate::constellation::Constellation;
use crate::error::Result;

use super::posterior::argmax_log;
use super::{DetectorParams, LikelihoodTable, TruncationPolicy};

/// Every photon-count path of the adaptive measurement that survived
/// truncation, with per-state path likelihoods.
///
/// Leaves are stored in flat arrays; use [`OutcomeTree::leaves`] to iterate.
#[derive(Debug, Clone)]
pub struct OutcomeTree {
    n_states: usize,
    rounds: usize,
    priors: Vec<f64>,
    counts: Vec<u8>,
    hypotheses: Vec<u8>,
    log_likelihoods: Vec<f64>,
    probabilities: Vec<f64>,
    decisions: Vec<u8>,
    discarded_mass: f64,
    discarded_per_state: Vec<f64>,
    warning: Option<String>,
}

/// One enumerated path `(n_0, …, n_{M-1})`.
#[derive(Debug, Clone, Copy)]
pub struct Leaf<'a> {
    tree: &'a OutcomeTree,
    index: usize,
}

impl<'a> Leaf<'a> {
    pub fn index(&self) -> usize {
        self.index
    }

    /// Photon counts observed in each round.
    pub fn counts(&self) -> &'a [u8] {
        let m = self.tree.rounds;
        &self.tree.counts[self.index * m..(self.index + 1) * m]
    }

    /// MAP hypothesis used for the displacement in each round.
    pub fn hypotheses(&self) -> &'a [u8] {
        let m = self.tree.rounds;
        &self.tree.hypotheses[self.index * m..(self.index + 1) * m]
    }

    /// `ln P(path | β_k)` for every state.
    pub fn log_likelihoods(&self) -> &'a [f64] {
        let n = self.tree.n_states;
        &self.tree.log_likelihoods[self.index * n..(self.index + 1) * n]
    }

    pub fn likelihood(&self, k: usize) -> f64 {
        self.log_likelihoods()[k].exp()
    }

    /// Total path probability `Σ_k p_k P(path | β_k)`.
    pub fn probability(&self) -> f64 {
        self.tree.probabilities[self.index]
    }

    pub fn decision(&self) -> usize {
        self.tree.decisions[self.index] as usize
    }

    /// Posterior over the states given the full path.
    pub fn posterior(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.tree.n_states];
        self.posterior_into(&mut out);
        out
    }

    pub fn posterior_into(&self, out: &mut [f64]) {
        let ll = self.log_likelihoods();
        let mut peak = f64::NEG_INFINITY;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.tree.priors[k].ln() + ll[k];
            peak = peak.max(*o);
        }
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - peak).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
}

impl OutcomeTree {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn leaf(&self, index: usize) -> Leaf<'_> {
        assert!(index < self.len());
        Leaf { tree: self, index }
    }

    pub fn leaves(&self) -> impl ExactSizeIterator<Item = Leaf<'_>> + '_ {
        (0..self.len()).map(move |index| Leaf { tree: self, index })
    }

    /// Probability mass dropped by truncation and pruning.
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    /// `Σ_{dropped paths} P(path | β_k)` for each state.
    pub fn discarded_per_state(&self) -> &[f64] {
        &self.discarded_per_state
    }

    /// Set when the discarded mass exceeds the policy's report threshold.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Debug view of the tree with at most `max_leaves` leaves.
    pub fn export(&self, max_leaves: usize) -> TreeExport {
        let leaves = self
            .leaves()
            .take(max_leaves)
            .map(|leaf| LeafExport {
                counts: leaf.counts().to_vec(),
                hypotheses: leaf.hypotheses().to_vec(),
                probability: leaf.probability(),
                decision: leaf.decision(),
                posterior: leaf.posterior(),
            })
            .collect();
        TreeExport {
            rounds: self.rounds,
            n_states: self.n_states,
            total_leaves: self.len(),
            discarded_mass: self.discarded_mass,
            warning: self.warning.clone(),
            leaves,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeExport {
    pub rounds: usize,
    pub n_states: usize,
    pub total_leaves: usize,
    pub discarded_mass: f64,
    pub warning: Option<String>,
    pub leaves: Vec<LeafExport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeafExport {
    pub counts: Vec<u8>,
    pub hypotheses: Vec<u8>,
    pub probability: f64,
    pub decision: usize,
    pub posterior: Vec<f64>,
}

struct Enumerator<'a> {
    table: &'a LikelihoodTable,
    log_priors: Vec<f64>,
    policy: TruncationPolicy,
    tree: OutcomeTree,
    counts: Vec<u8>,
    hyps: Vec<u8>,
}

impl Enumerator<'_> {
    fn map_hypothesis(&self, log_lik: &[f64]) -> usize {
        let scores: Vec<f64> = self.log_priors.iter().zip(log_lik).map(|(a, b)| a + b).collect();
        argmax_log(&scores)
    }

    fn expand(&mut self, round: usize, lin: &[f64], log_lik: &[f64]) {
        let n_states = self.tree.n_states;
        let hyp = self.map_hypothesis(log_lik);
        let n_max = self.table.n_max(hyp);
        let last = round + 1 == self.tree.rounds;

        let mut child_lin = vec![0.0; n_states];
        let mut child_log = vec![0.0; n_states];
        self.hyps.push(hyp as u8);
        for n in 0..=n_max {
            let row = self.table.row(hyp, n);
            let log_row = self.table.log_row(hyp, n);
            let mut mass = 0.0;
            for k in 0..n_states {
                child_lin[k] = lin[k] * row[k];
                child_log[k] = log_lik[k] + log_row[k];
                mass += self.tree.priors[k] * child_lin[k];
            }
            if mass < self.policy.path_eps || mass == 0.0 {
                self.tree.discarded_mass += mass;
                for (d, l) in self.tree.discarded_per_state.iter_mut().zip(&child_lin) {
                    *d += l;
                }
                continue;
            }
            self.counts.push(n as u8);
            if last {
                let decision = self.map_hypothesis(&child_log);
                let t = &mut self.tree;
                t.counts.extend_from_slice(&self.counts);
                t.hypotheses.extend_from_slice(&self.hyps);
                t.log_likelihoods.extend_from_slice(&child_log);
                t.probabilities.push(mass);
                t.decisions.push(decision as u8);
            } else {
                let (l, g) = (child_lin.clone(), child_log.clone());
                self.expand(round + 1, &l, &g);
            }
            self.counts.pop();
        }
        self.hyps.pop();

        // counts beyond n_max
        let tail = self.table.tail(hyp);
        for k in 0..n_states {
            let lost = lin[k] * tail[k];
            self.tree.discarded_per_state[k] += lost;
            self.tree.discarded_mass += self.tree.priors[k] * lost;
        }
    }
}

/// Enumerate all adaptive-measurement outcomes.
///
/// The round-0 hypothesis is the MAP state of the priors; afterwards the
/// hypothesis for each round is the MAP state of the posterior so far. Ties
/// go to the lowest index.
pub fn enumerate_outcome_tree(
    constellation: &Constellation,
    params: &DetectorParams,
    truncation: &TruncationPolicy,
) -> Result<OutcomeTree> {
    params.validate()?;
    truncation.validate()?;
    let table = LikelihoodTable::new(constellation, params, truncation);
    Ok(enumerate_with_table(constellation, params, truncation, &table))
}

pub(crate) fn enumerate_with_table(
    constellation: &Constellation,
    params: &DetectorParams,
    truncation: &TruncationPolicy,
    table: &LikelihoodTable,
) -> OutcomeTree {
    let n_states = constellation.len();
    let priors = constellation.priors().to_vec();
    let mut e = Enumerator {
        table,
        log_priors: priors.iter().map(|p| p.ln()).collect(),
        policy: *truncation,
        tree: OutcomeTree {
            n_states,
            rounds: params.rounds,
            priors,
            counts: Vec::new(),
            hypotheses: Vec::new(),
            log_likelihoods: Vec::new(),
            probabilities: Vec::new(),
            decisions: Vec::new(),
            discarded_mass: 0.0,
            discarded_per_state: vec![0.0; n_states],
            warning: None,
        },
        counts: Vec::with_capacity(params.rounds),
        hyps: Vec::with_capacity(params.rounds),
    };
    e.expand(0, &vec![1.0; n_states], &vec![0.0; n_states]);

    let mut tree = e.tree;
    if tree.discarded_mass > truncation.report_threshold {
        let msg = format!(
            "discarded probability mass {:.3e} exceeds report threshold {:.1e}",
            tree.discarded_mass, truncation.report_threshold
        );
        log::warn!("{msg}");
        tree.warning = Some(msg);
    }
    tree
}

/// Error probability with the truncation error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub probability: f64,
    /// The exact value lies in `[probability - discarded_mass, probability]`.
    pub discarded_mass: f64,
}

impl OutcomeTree {
    /// `1 - Σ_paths p_{k̃} P(path | β_{k̃})`, `k̃` the decision on the path.
    pub fn error_probability(&self) -> ErrorEstimate {
        let correct: f64 = self
            .leaves()
            .map(|leaf| {
                let d = leaf.decision();
                self.priors[d] * leaf.likelihood(d)
            })
            .sum();
        ErrorEstimate {
            probability: (1.0 - correct).clamp(0.0, 1.0),
            discarded_mass: self.discarded_mass,
        }
    }
}

pub fn error_probability_sdd(
    constellation: &Constellation,
    params: &DetectorParams,
    truncation: &TruncationPolicy,
) -> Result<ErrorEstimate> {
    Ok(enumerate_outcome_tree(constellation, params, truncation)?.error_probability())
}
