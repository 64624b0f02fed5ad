use crate::constellation::{ComplexAmplitude, Constellation};

use super::{detection_pmf, DetectorParams, TruncationPolicy};

/// Photon-count likelihoods `P(n | β_k, γ_h)` for every hypothesis `h` and
/// candidate state `k`, truncated per hypothesis.
///
/// All branches carry the same intensity `1/M`, so one table serves every
/// round.
#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    n_states: usize,
    hypotheses: Vec<HypothesisRows>,
}

#[derive(Debug, Clone)]
struct HypothesisRows {
    gamma: ComplexAmplitude,
    n_max: usize,
    /// `(n_max + 1) × n_states`, indexed `n * n_states + k`.
    pmf: Vec<f64>,
    log_pmf: Vec<f64>,
    /// Mass beyond `n_max` for each state.
    tail: Vec<f64>,
}

impl LikelihoodTable {
    pub fn new(
        constellation: &Constellation,
        params: &DetectorParams,
        truncation: &TruncationPolicy,
    ) -> Self {
        let points = constellation.points();
        let n_states = points.len();
        let scale = 1.0 / (params.rounds as f64).sqrt();
        let cap = truncation.photon_cap;

        let hypotheses = points
            .iter()
            .map(|&hyp| {
                let gamma = hyp * scale;
                let per_state: Vec<Vec<f64>> = points
                    .iter()
                    .map(|&beta| detection_pmf(beta, gamma, params, cap))
                    .collect();

                // first n where every state's remaining tail is below tail_eps
                let mut cumulative = vec![0.0; n_states];
                let mut n_max = cap;
                for n in 0..=cap {
                    let mut worst: f64 = 0.0;
                    for (c, pmf) in cumulative.iter_mut().zip(&per_state) {
                        *c += pmf[n];
                        worst = worst.max(1.0 - *c);
                    }
                    if worst < truncation.tail_eps {
                        n_max = n;
                        break;
                    }
                }

                let mut pmf = Vec::with_capacity((n_max + 1) * n_states);
                for n in 0..=n_max {
                    pmf.extend(per_state.iter().map(|p| p[n]));
                }
                let log_pmf = pmf.iter().map(|p| p.ln()).collect();
                let tail = per_state
                    .iter()
                    .map(|p| (1.0 - p[..=n_max].iter().sum::<f64>()).max(0.0))
                    .collect();
                HypothesisRows {
                    gamma,
                    n_max,
                    pmf,
                    log_pmf,
                    tail,
                }
            })
            .collect();

        Self {
            n_states,
            hypotheses,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Displacement amplitude `γ_h = β_h/√M`.
    pub fn gamma(&self, hypothesis: usize) -> ComplexAmplitude {
        self.hypotheses[hypothesis].gamma
    }

    /// Largest photon count enumerated under `hypothesis`.
    pub fn n_max(&self, hypothesis: usize) -> usize {
        self.hypotheses[hypothesis].n_max
    }

    /// `P(n | β_k, γ_h)` for every `k`.
    pub fn row(&self, hypothesis: usize, n: usize) -> &[f64] {
        let rows = &self.hypotheses[hypothesis];
        &rows.pmf[n * self.n_states..(n + 1) * self.n_states]
    }

    pub fn log_row(&self, hypothesis: usize, n: usize) -> &[f64] {
        let rows = &self.hypotheses[hypothesis];
        &rows.log_pmf[n * self.n_states..(n + 1) * self.n_states]
    }

    /// Probability that state `k` produces more than `n_max(h)` photons.
    pub fn tail(&self, hypothesis: usize) -> &[f64] {
        &self.hypotheses[hypothesis].tail
    }

    /// Inverse-CDF draw from the truncated distribution of state `k` under
    /// `hypothesis`; `u ∈ [0, 1)`. Draws landing in the tail return `n_max`.
    pub fn sample(&self, hypothesis: usize, k: usize, u: f64) -> usize {
        let rows = &self.hypotheses[hypothesis];
        let mut cumulative = 0.0;
        for n in 0..rows.n_max {
            cumulative += rows.pmf[n * self.n_states + k];
            if u < cumulative {
                return n;
            }
        }
        rows.n_max
    }
}
