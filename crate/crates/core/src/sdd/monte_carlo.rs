use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::Constellation;
use crate::error::{Error, Result};

use super::posterior::argmax_log;
use super::{DetectorParams, LikelihoodTable, TruncationPolicy};

/// One simulated pass through the detector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DetectionRun {
    pub counts: Vec<usize>,
    pub hypotheses: Vec<usize>,
    pub decision: usize,
}

impl LikelihoodTable {
    /// Run the adaptive measurement on true state `k`, drawing photon counts
    /// from `rng`. The MAP feedback is the same as in the outcome tree.
    pub fn simulate<R: Rng + ?Sized>(&self, k: usize, priors: &[f64], rounds: usize, rng: &mut R) -> DetectionRun {
        let mut scores: Vec<f64> = priors.iter().map(|p| p.ln()).collect();
        let mut counts = Vec::with_capacity(rounds);
        let mut hypotheses = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let hyp = argmax_log(&scores);
            let n = self.sample(hyp, k, rng.random::<f64>());
            for (s, l) in scores.iter_mut().zip(self.log_row(hyp, n)) {
                *s += l;
            }
            counts.push(n);
            hypotheses.push(hyp);
        }
        DetectionRun {
            counts,
            hypotheses,
            decision: argmax_log(&scores),
        }
    }
}

/// Simulate a single detection of state `k`, reproducible from `seed`.
pub fn simulate_detection(
    k: usize,
    constellation: &Constellation,
    params: &DetectorParams,
    truncation: &TruncationPolicy,
    seed: u64,
) -> Result<DetectionRun> {
    if k >= constellation.len() {
        return Err(Error::invalid("k", format!("state index {k} out of range")));
    }
    params.validate()?;
    truncation.validate()?;
    let table = LikelihoodTable::new(constellation, params, truncation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(table.simulate(k, constellation.priors(), params.rounds, &mut rng))
}

/// Empirical error rate over independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    /// Binomial standard deviation of `error_rate`.
    pub std_error: f64,
}

/// Trial `i` draws its true state from the priors and then runs the
/// detector, all from a ChaCha stream keyed by `(seed, i)`. The result does
/// not depend on how trials are spread over threads.
pub fn monte_carlo_error_rate(
    constellation: &Constellation,
    params: &DetectorParams,
    truncation: &TruncationPolicy,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    params.validate()?;
    truncation.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let table = LikelihoodTable::new(constellation, params, truncation);
    let priors = constellation.priors();
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let k = sample_state(priors, rng.random::<f64>());
            let run = table.simulate(k, priors, params.rounds, &mut rng);
            u64::from(run.decision != k)
        })
        .sum();
    let rate = errors as f64 / trials as f64;
    Ok(MonteCarloEstimate {
        trials,
        errors,
        error_rate: rate,
        std_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
    })
}

pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub(crate) fn sample_state(priors: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (k, p) in priors.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    priors.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_mixed_constellation, ChannelModel};
    use num_complex::Complex64;

    #[test]
    fn same_seed_same_run() {
        let ch = ChannelModel::new(20.0, 0.5, 0.2).unwrap();
        let mc = build_mixed_constellation(1.5, &ch, None).unwrap();
        let params = DetectorParams::laboratory(4);
        let policy = TruncationPolicy::default();
        let a = simulate_detection(6, mc.states(), &params, &policy, 99).unwrap();
        let b = simulate_detection(6, mc.states(), &params, &policy, 99).unwrap();
        assert_eq!(a, b);
        assert!(simulate_detection(16, mc.states(), &params, &policy, 99).is_err());
    }

    #[test]
    fn nulled_branches_stay_dark() {
        // ideal detector and a true state that the prior MAP already names
        let pts = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.7, 0.2)];
        let c = Constellation::new(pts, vec![0.7, 0.3]).unwrap();
        let params = DetectorParams::ideal(4);
        for seed in 0..50 {
            let run = simulate_detection(0, &c, &params, &TruncationPolicy::default(), seed).unwrap();
            assert!(run.counts.iter().all(|&n| n == 0));
            assert!(run.hypotheses.iter().all(|&h| h == 0));
            assert_eq!(run.decision, 0);
        }
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let ch = ChannelModel::new(30.0, 0.5, 0.2).unwrap();
        let mc = build_mixed_constellation(1.2, &ch, None).unwrap();
        let params = DetectorParams::laboratory(2);
        let policy = TruncationPolicy::default();
        let a = monte_carlo_error_rate(mc.states(), &params, &policy, 2000, 7).unwrap();
        let b = monte_carlo_error_rate(mc.states(), &params, &policy, 2000, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn state_sampling_follows_priors() {
        let priors = [0.2, 0.5, 0.3];
        assert_eq!(sample_state(&priors, 0.0), 0);
        assert_eq!(sample_state(&priors, 0.19), 0);
        assert_eq!(sample_state(&priors, 0.21), 1);
        assert_eq!(sample_state(&priors, 0.71), 2);
        assert_eq!(sample_state(&priors, 0.999_999), 2);
    }
}
