//! Mutual information, Holevo bounds and asymptotic key rates against a
//! beam-splitting collective attack.

mod entropy;
mod holevo;
mod rate;

pub use entropy::{binary_entropy, shannon_entropy, von_neumann_entropy, SpanDensityOperator, CLAMP_THRESHOLD};
pub use holevo::{holevo_dr, holevo_rr, joint_decision_distribution, JointDecisionDistribution};
pub use rate::{
    key_rate, key_rate_post_selected, leaf_mutual_information, mutual_information_iud,
    per_outcome_mutual_information, MutualInformation, PostSelectedRate, LOW_PRECISION_MASS,
};

use serde::{Deserialize, Serialize};

use crate::constellation::{build_eve_constellation, MixedConstellation, OverlapConvention};
use crate::error::{Error, Result};
use crate::sdd::{enumerate_outcome_tree, DetectorParams, OutcomeTree, TruncationPolicy};

/// Which party's data is the reference for key distillation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reconciliation {
    Dr,
    #[default]
    Rr,
}

impl std::str::FromStr for Reconciliation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dr" | "direct" => Ok(Self::Dr),
            "rr" | "reverse" => Ok(Self::Rr),
            other => Err(Error::invalid("reconciliation", format!("unknown value {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub convention: OverlapConvention,
    /// Multiplies `I_UD`; 1 means perfect reconciliation.
    pub reconciliation_efficiency: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            convention: OverlapConvention::Modulus,
            reconciliation_efficiency: 1.0,
        }
    }
}

/// All rate quantities at one parameter point, in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub i_ud: f64,
    pub h_u: f64,
    pub h_u_given_d: f64,
    pub chi_ue: f64,
    pub chi_de: f64,
    pub r_dr: f64,
    pub r_rr: f64,
    pub r_ps: f64,
    pub discarded_mass: f64,
    pub retained_fraction: f64,
    pub low_precision: bool,
}

impl KeyRateReport {
    pub fn rate(&self, reconciliation: Reconciliation, post_selection: bool) -> f64 {
        match (reconciliation, post_selection) {
            (_, true) => self.r_ps,
            (Reconciliation::Dr, false) => self.r_dr,
            (Reconciliation::Rr, false) => self.r_rr,
        }
    }
}

/// Rates from an already enumerated tree of `mixed`.
pub fn key_rates_from_tree(
    mixed: &MixedConstellation,
    tree: &OutcomeTree,
    options: &RateOptions,
) -> Result<KeyRateReport> {
    let eff = options.reconciliation_efficiency;
    if !(eff > 0.0 && eff <= 1.0) {
        return Err(Error::invalid("reconciliation_efficiency", "must lie in (0, 1]"));
    }
    let eve = build_eve_constellation(mixed.alpha(), mixed.channel())?;
    let mi = mutual_information_iud(tree);
    let chi_ue = holevo_dr(&eve, mixed.priors(), options.convention)?;
    let joint = JointDecisionDistribution::from_tree(tree);
    let chi_de = holevo_rr(&joint, &eve, options.convention)?;
    let ps = key_rate_post_selected(tree, chi_de, eff);
    Ok(KeyRateReport {
        i_ud: mi.i_ud,
        h_u: mi.h_u,
        h_u_given_d: mi.h_u_given_d,
        chi_ue,
        chi_de,
        r_dr: key_rate(eff * mi.i_ud, chi_ue),
        r_rr: key_rate(eff * mi.i_ud, chi_de),
        r_ps: ps.rate,
        discarded_mass: mi.discarded_mass,
        retained_fraction: ps.retained_fraction,
        low_precision: mi.low_precision,
    })
}

/// Enumerate the detector tree for `mixed` and evaluate every rate.
pub fn evaluate_key_rates(
    mixed: &MixedConstellation,
    params: &DetectorParams,
    truncation: &TruncationPolicy,
    options: &RateOptions,
) -> Result<KeyRateReport> {
    let tree = enumerate_outcome_tree(mixed.states(), params, truncation)?;
    key_rates_from_tree(mixed, &tree, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_mixed_constellation, ChannelModel, Constellation};
    use crate::sdd::detection_pmf;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn lab_point(distance: f64, alpha: f64, rounds: usize) -> (MixedConstellation, OutcomeTree) {
        let ch = ChannelModel::new(distance, 0.5, 0.2).unwrap();
        let mc = build_mixed_constellation(alpha, &ch, None).unwrap();
        let tree = enumerate_outcome_tree(mc.states(), &DetectorParams::laboratory(rounds), &TruncationPolicy::default())
            .unwrap();
        (mc, tree)
    }

    #[test]
    fn binary_channel_oracle() {
        // M = 1, two states: the tree is a single-use discrete channel
        let pts = vec![Complex64::new(0.9, 0.3), Complex64::new(-0.4, 0.8)];
        let c = Constellation::new(pts.clone(), vec![0.5, 0.5]).unwrap();
        let params = DetectorParams::laboratory(1);
        let tree = enumerate_outcome_tree(&c, &params, &TruncationPolicy::default()).unwrap();
        let mi = mutual_information_iud(&tree);

        let rows: Vec<Vec<f64>> = pts.iter().map(|&b| detection_pmf(b, pts[0], &params, 80)).collect();
        let mut oracle = 0.0;
        for n in 0..=80 {
            let pn = 0.5 * rows[0][n] + 0.5 * rows[1][n];
            for row in &rows {
                if row[n] > 0.0 {
                    oracle += 0.5 * row[n] * (row[n] / pn).log2();
                }
            }
        }
        assert_abs_diff_eq!(mi.i_ud, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(mi.h_u, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_states_carry_nothing() {
        let c = Constellation::uniform(vec![Complex64::new(0.3, 0.1); 16]).unwrap();
        let tree = enumerate_outcome_tree(&c, &DetectorParams::laboratory(2), &TruncationPolicy::default()).unwrap();
        let mi = mutual_information_iud(&tree);
        assert_abs_diff_eq!(mi.i_ud, 0.0, epsilon = 1e-9);
        let eve_ch = ChannelModel::from_transmittances(0.5, 1.0).unwrap();
        let eve = build_eve_constellation(1.0, &eve_ch).unwrap();
        let joint = JointDecisionDistribution::from_tree(&tree);
        let chi = holevo_rr(&joint, &eve, OverlapConvention::Modulus).unwrap();
        assert_abs_diff_eq!(chi, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn lossless_second_link_hides_nothing() {
        let ch = ChannelModel::from_transmittances(0.3, 1.0).unwrap();
        let eve = build_eve_constellation(1.5, &ch).unwrap();
        assert!(eve.epsilons().iter().all(|e| e.norm() == 0.0));
        let chi = holevo_dr(&eve, &[1.0 / 16.0; 16], OverlapConvention::Modulus).unwrap();
        assert_abs_diff_eq!(chi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_leakage_saturates() {
        let ch = ChannelModel::from_transmittances(1e-3, 1e-2).unwrap();
        let eve = build_eve_constellation(60.0, &ch).unwrap();
        let chi = holevo_dr(&eve, &[1.0 / 16.0; 16], OverlapConvention::Modulus).unwrap();
        assert_abs_diff_eq!(chi, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn joint_distribution_bookkeeping() {
        let (_, tree) = lab_point(20.0, 1.3, 3);
        let joint = JointDecisionDistribution::from_tree(&tree);
        let total: f64 = joint.as_slice().iter().sum();
        assert_abs_diff_eq!(total + joint.discarded_mass(), 1.0, epsilon = 1e-8);
        for (row, p) in joint.state_marginals().iter().zip(tree.priors()) {
            assert!((row - p).abs() <= joint.discarded_mass() + 1e-12);
        }
        // column sums by direct re-aggregation of leaves
        let mut cols = vec![0.0; 16];
        for leaf in tree.leaves() {
            cols[leaf.decision()] += leaf.probability();
        }
        for (a, b) in cols.iter().zip(joint.decision_marginals()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn perfect_discrimination_gives_diagonal_joint() {
        let pts: Vec<Complex64> = (0..4).map(|k| Complex64::new(9.0 * (k % 2) as f64, 9.0 * (k / 2) as f64)).collect();
        let c = Constellation::uniform(pts).unwrap();
        let policy = TruncationPolicy {
            photon_cap: 255,
            ..TruncationPolicy::default()
        };
        let tree = enumerate_outcome_tree(&c, &DetectorParams::ideal(3), &policy).unwrap();
        let joint = JointDecisionDistribution::from_tree(&tree);
        for k in 0..4 {
            for j in 0..4 {
                let expect = if k == j { 0.25 } else { 0.0 };
                assert_abs_diff_eq!(joint.get(k, j), expect, epsilon = 1e-5);
            }
        }
        let mi = mutual_information_iud(&tree);
        assert_abs_diff_eq!(mi.i_ud, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn leaf_decomposition_matches_total() {
        let (_, tree) = lab_point(15.0, 1.1, 4);
        let mi = mutual_information_iud(&tree);
        let weighted: f64 = tree
            .leaves()
            .map(|l| l.probability() * leaf_mutual_information(&l, tree.priors()))
            .sum();
        let d = tree.discarded_mass();
        // leaf mass sums to 1 - d, the H(U) term accounts for the rest
        assert_abs_diff_eq!(weighted + d * mi.h_u, mi.i_ud, epsilon = 1e-8);
    }

    #[test]
    fn report_orderings() {
        for (d, alpha, m) in [(5.0, 1.0, 2), (20.0, 1.4, 4), (60.0, 1.8, 3)] {
            let (mc, tree) = lab_point(d, alpha, m);
            let r = key_rates_from_tree(&mc, &tree, &RateOptions::default()).unwrap();
            assert!(r.i_ud >= -1e-12 && r.i_ud <= r.h_u + 1e-12 && r.h_u <= 4.0 + 1e-12);
            assert!(r.chi_ue >= r.chi_de - 1e-9, "{r:?}");
            assert!(r.chi_de >= 0.0 && r.chi_ue <= 4.0);
            let slack = r.h_u * r.discarded_mass + 1e-12;
            assert!(r.r_ps + slack >= r.r_rr.max(0.0), "{r:?}");
            assert!(r.retained_fraction <= 1.0);
        }
    }

    #[test]
    fn dual_convention_on_collinear_points() {
        // Eve's amplitudes are real when every symbol is: compare conventions there
        let ch = ChannelModel::new(20.0, 0.5, 0.2).unwrap();
        let eve = build_eve_constellation(1.2, &ch).unwrap();
        let real: Vec<Complex64> = eve.epsilons().iter().map(|e| Complex64::new(e.re + e.im, 0.0)).collect();
        let w = [1.0 / 16.0; 16];
        let a = SpanDensityOperator::new(&w, &real, OverlapConvention::Modulus).unwrap();
        let b = SpanDensityOperator::new(&w, &real, OverlapConvention::Full).unwrap();
        assert_abs_diff_eq!(a.entropy(), b.entropy(), epsilon = 1e-10);
    }

    #[test]
    fn reconciliation_parses() {
        assert_eq!("dr".parse::<Reconciliation>().unwrap(), Reconciliation::Dr);
        assert_eq!("RR".parse::<Reconciliation>().unwrap(), Reconciliation::Rr);
        assert!("x".parse::<Reconciliation>().is_err());
    }
}
