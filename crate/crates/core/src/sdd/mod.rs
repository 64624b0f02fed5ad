//! Adaptive state-discrimination detector.
//!
//! The received field is split into `M` equal-intensity branches. Branch `i`
//! is displaced by `-γ = -β_h/√M`, where `h` is the current MAP hypothesis,
//! and measured with a photon-number-resolving detector. Each count updates
//! the posterior over the candidate states, and the final decision is the MAP
//! state after all `M` rounds.

mod monte_carlo;
mod photon;
mod posterior;
mod table;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use monte_carlo::{
    monte_carlo_error_rate, simulate_detection, DetectionRun, MonteCarloEstimate,
};
pub use photon::{detection_pmf, detection_probability, mean_photon_number};
pub use posterior::{bayes_update, map_select, BayesOutcome, PosteriorTable};
pub use table::LikelihoodTable;
pub(crate) use monte_carlo::sample_state;
pub use tree::{
    enumerate_outcome_tree, error_probability_sdd, ErrorEstimate, Leaf, LeafExport, OutcomeTree, TreeExport,
};

/// Physical parameters of the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Number of adaptive rounds `M`.
    pub rounds: usize,
    /// PNRD quantum efficiency `η_s`.
    pub eta_s: f64,
    /// Mean thermal photon number `N_t`.
    pub n_thermal: f64,
    /// Interference visibility `ξ`.
    pub visibility: f64,
    /// Dark count `ν`.
    pub dark_count: f64,
    /// Transmittance `ζ` of the displacement beam splitter.
    pub bs_transmittance: f64,
}

impl DetectorParams {
    pub fn new(
        rounds: usize,
        eta_s: f64,
        n_thermal: f64,
        visibility: f64,
        dark_count: f64,
        bs_transmittance: f64,
    ) -> Result<Self> {
        let p = Self {
            rounds,
            eta_s,
            n_thermal,
            visibility,
            dark_count,
            bs_transmittance,
        };
        p.validate()?;
        Ok(p)
    }

    /// Realistic laboratory values: `η_s = 0.72`, `N_t = 0.01`,
    /// `ξ = 0.998`, `ν = 0.001`, `ζ = 0.99`.
    pub fn laboratory(rounds: usize) -> Self {
        Self {
            rounds,
            eta_s: 0.72,
            n_thermal: 0.01,
            visibility: 0.998,
            dark_count: 0.001,
            bs_transmittance: 0.99,
        }
    }

    /// Noiseless unit-efficiency detector.
    pub fn ideal(rounds: usize) -> Self {
        Self {
            rounds,
            eta_s: 1.0,
            n_thermal: 0.0,
            visibility: 1.0,
            dark_count: 0.0,
            bs_transmittance: 1.0,
        }
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("rounds", "must be >= 1"));
        }
        if self.rounds > 32 {
            return Err(Error::invalid("rounds", "at most 32 rounds are supported"));
        }
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        if !in_unit(self.eta_s) {
            return Err(Error::invalid("eta_s", format!("must lie in (0, 1], got {}", self.eta_s)));
        }
        if !(self.n_thermal.is_finite() && self.n_thermal >= 0.0) {
            return Err(Error::invalid("n_thermal", format!("must be >= 0, got {}", self.n_thermal)));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::invalid(
                "visibility",
                format!("must lie in [0, 1], got {}", self.visibility),
            ));
        }
        if !(self.dark_count.is_finite() && self.dark_count >= 0.0) {
            return Err(Error::invalid("dark_count", format!("must be >= 0, got {}", self.dark_count)));
        }
        if !in_unit(self.bs_transmittance) {
            return Err(Error::invalid(
                "bs_transmittance",
                format!("must lie in (0, 1], got {}", self.bs_transmittance),
            ));
        }
        Ok(())
    }

    /// Reflectivities `R_i = 1/(M-i)` of the splitting cascade.
    pub fn reflectivities(&self) -> Vec<f64> {
        (0..self.rounds).map(|i| 1.0 / (self.rounds - i) as f64).collect()
    }
}

/// Where the outcome enumeration stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// A branch's photon count range ends once the tail beyond it is below
    /// this for every candidate state.
    pub tail_eps: f64,
    /// Paths whose prior-weighted probability falls below this are dropped.
    pub path_eps: f64,
    /// Hard upper bound on photons counted per branch.
    pub photon_cap: usize,
    /// Discarded mass above this attaches a warning to the tree.
    pub report_threshold: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_eps: 1e-10,
            path_eps: 1e-12,
            photon_cap: 40,
            report_threshold: 1e-6,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return Err(Error::invalid("tail_eps", "must lie in (0, 1)"));
        }
        if !(self.path_eps >= 0.0 && self.path_eps < 1.0) {
            return Err(Error::invalid("path_eps", "must lie in [0, 1)"));
        }
        if self.photon_cap == 0 || self.photon_cap > u8::MAX as usize {
            return Err(Error::invalid("photon_cap", "must lie in 1..=255"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflectivities_split_equally() {
        let p = DetectorParams::laboratory(4);
        assert_eq!(p.reflectivities(), vec![0.25, 1.0 / 3.0, 0.5, 1.0]);
        // each branch receives 1/M of the input intensity
        let mut remaining = 1.0;
        for r in p.reflectivities() {
            assert!((remaining * r - 0.25).abs() < 1e-15);
            remaining *= 1.0 - r;
        }
    }

    #[test]
    fn parameter_ranges() {
        assert!(DetectorParams::laboratory(4).validate().is_ok());
        assert!(DetectorParams::laboratory(0).validate().is_err());
        assert!(DetectorParams::new(2, 0.0, 0.01, 0.9, 0.0, 0.9).is_err());
        assert!(DetectorParams::new(2, 0.7, -0.01, 0.9, 0.0, 0.9).is_err());
        assert!(DetectorParams::new(2, 0.7, 0.01, 1.1, 0.0, 0.9).is_err());
        assert!(DetectorParams::new(2, 0.7, 0.01, 0.9, -1.0, 0.9).is_err());
        assert!(DetectorParams::new(2, 0.7, 0.01, 0.9, 0.0, 0.0).is_err());
    }
}
