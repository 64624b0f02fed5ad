//! Bit-level (2,2) secret-sharing session.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{build_mixed_constellation, ChannelModel};
use crate::error::{Error, Result};
use crate::sdd::{DetectorParams, LikelihoodTable, TruncationPolicy};

/// Ordered bits, serialised as a string of `0`/`1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct BitSequence(Vec<bool>);

impl BitSequence {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| rng.random::<bool>()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Consecutive 2-bit pairs; the length must be even.
    pub fn pairs(&self) -> Result<impl Iterator<Item = (bool, bool)> + '_> {
        if self.0.len() % 2 != 0 {
            return Err(Error::invalid("bits", "length must be even"));
        }
        Ok(self.0.chunks_exact(2).map(|c| (c[0], c[1])))
    }

    pub fn hamming_distance(&self, other: &Self) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::invalid("bits", "length mismatch"));
        }
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::invalid("bits", "length mismatch"));
        }
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect()))
    }
}

impl fmt::Display for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BitSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::invalid("bits", format!("unexpected character {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl From<BitSequence> for String {
    fn from(b: BitSequence) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for BitSequence {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// `00 → 0, 01 → 1, 10 → 2, 11 → 3`.
pub fn map_bits_to_symbol(b0: bool, b1: bool) -> usize {
    2 * usize::from(b0) + usize::from(b1)
}

pub fn demap_symbol(index: usize) -> (bool, bool) {
    assert!(index < 4, "QPSK index out of range");
    (index & 2 != 0, index & 1 != 0)
}

/// 1-indexed position of user 1's `m`-th bit in the dealer's sequence.
pub fn user1_position(m: usize) -> usize {
    4 * ((m - 1) / 2) + if m % 2 == 1 { 1 } else { 2 }
}

/// 1-indexed position of user 2's `m`-th bit.
pub fn user2_position(m: usize) -> usize {
    4 * ((m - 1) / 2) + if m % 2 == 1 { 3 } else { 4 }
}

/// Split the dealer's sequence into the two users' raw keys.
pub fn demultiplex(dealer: &BitSequence) -> Result<(BitSequence, BitSequence)> {
    if dealer.len() % 4 != 0 {
        return Err(Error::invalid("dealer", "length must be divisible by 4"));
    }
    let half = dealer.len() / 2;
    let bits = dealer.bits();
    let u1 = (1..=half).map(|m| bits[user1_position(m) - 1]).collect();
    let u2 = (1..=half).map(|m| bits[user2_position(m) - 1]).collect();
    Ok((BitSequence(u1), BitSequence(u2)))
}

/// Inverse of [`demultiplex`]: alternate 2-bit blocks from each user.
pub fn interleave(u1: &BitSequence, u2: &BitSequence) -> Result<BitSequence> {
    if u1.len() != u2.len() || u1.len() % 2 != 0 {
        return Err(Error::invalid("bits", "need equal even lengths"));
    }
    let mut out = Vec::with_capacity(2 * u1.len());
    for (a, b) in u1.0.chunks_exact(2).zip(u2.0.chunks_exact(2)) {
        out.extend_from_slice(a);
        out.extend_from_slice(b);
    }
    Ok(BitSequence(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Every state is identified correctly.
    Ideal,
    #[default]
    MonteCarlo,
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Self::Ideal),
            "monte_carlo" | "monte-carlo" | "mc" => Ok(Self::MonteCarlo),
            other => Err(Error::invalid("detector", format!("unknown detector {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub seed: u64,
    pub m: usize,
    pub detector: DetectorKind,
    pub sent_u1: BitSequence,
    pub sent_u2: BitSequence,
    /// Dealer's re-mapped sequence, length `2m`.
    pub dealer: BitSequence,
    pub recovered_u1: BitSequence,
    pub recovered_u2: BitSequence,
    pub bit_errors_u1: usize,
    pub bit_errors_u2: usize,
    pub symbol_errors: usize,
    pub true_states: Vec<usize>,
    pub decisions: Vec<usize>,
}

impl SessionResult {
    pub fn ber_u1(&self) -> f64 {
        self.bit_errors_u1 as f64 / self.m as f64
    }

    pub fn ber_u2(&self) -> f64 {
        self.bit_errors_u2 as f64 / self.m as f64
    }

    pub fn symbol_error_rate(&self) -> f64 {
        self.symbol_errors as f64 / self.decisions.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub alpha: f64,
    pub channel: ChannelModel,
    pub detector_params: DetectorParams,
    pub truncation: TruncationPolicy,
    /// Bits per user.
    pub m: usize,
    pub seed: u64,
    pub detector: DetectorKind,
}

/// One session: both users draw `m` bits, every 2+2 bits form the mixed
/// state `k = 4k₁ + k₂`, the dealer detects and re-maps, then demultiplexes.
pub fn run_session(config: &SessionConfig) -> Result<SessionResult> {
    let m = config.m;
    if m < 2 || m % 2 != 0 {
        return Err(Error::invalid("m", "must be even and >= 2"));
    }
    config.detector_params.validate()?;
    config.truncation.validate()?;
    let mixed = build_mixed_constellation(config.alpha, &config.channel, None)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sent_u1 = BitSequence::random(m, &mut rng);
    let sent_u2 = BitSequence::random(m, &mut rng);
    let true_states: Vec<usize> = sent_u1
        .pairs()?
        .zip(sent_u2.pairs()?)
        .map(|((a0, a1), (b0, b1))| 4 * map_bits_to_symbol(a0, a1) + map_bits_to_symbol(b0, b1))
        .collect();

    let decisions: Vec<usize> = match config.detector {
        DetectorKind::Ideal => true_states.clone(),
        DetectorKind::MonteCarlo => {
            let table = LikelihoodTable::new(mixed.states(), &config.detector_params, &config.truncation);
            true_states
                .iter()
                .map(|&k| {
                    table
                        .simulate(k, mixed.priors(), config.detector_params.rounds, &mut rng)
                        .decision
                })
                .collect()
        }
    };

    let mut dealer = Vec::with_capacity(2 * m);
    for &d in &decisions {
        let (a0, a1) = demap_symbol(d / 4);
        let (b0, b1) = demap_symbol(d % 4);
        dealer.extend([a0, a1, b0, b1]);
    }
    let dealer = BitSequence(dealer);
    let (recovered_u1, recovered_u2) = demultiplex(&dealer)?;
    Ok(SessionResult {
        seed: config.seed,
        m,
        detector: config.detector,
        bit_errors_u1: recovered_u1.hamming_distance(&sent_u1)?,
        bit_errors_u2: recovered_u2.hamming_distance(&sent_u2)?,
        symbol_errors: decisions.iter().zip(&true_states).filter(|(d, k)| d != k).count(),
        sent_u1,
        sent_u2,
        dealer,
        recovered_u1,
        recovered_u2,
        true_states,
        decisions,
    })
}

/// `E = Y ⊕ K₁ ⊕ K₂`.
pub fn encode_secret(secret: &BitSequence, k1: &BitSequence, k2: &BitSequence) -> Result<BitSequence> {
    secret.xor(k1)?.xor(k2)
}

pub fn decode_secret(encrypted: &BitSequence, k1: &BitSequence, k2: &BitSequence) -> Result<BitSequence> {
    encrypted.xor(k1)?.xor(k2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> BitSequence {
        s.parse().unwrap()
    }

    #[test]
    fn symbol_mapping() {
        assert_eq!(map_bits_to_symbol(false, false), 0);
        assert_eq!(map_bits_to_symbol(false, true), 1);
        assert_eq!(map_bits_to_symbol(true, false), 2);
        assert_eq!(map_bits_to_symbol(true, true), 3);
        for i in 0..4 {
            let (a, b) = demap_symbol(i);
            assert_eq!(map_bits_to_symbol(a, b), i);
        }
    }

    #[test]
    fn eight_bit_demultiplex() {
        assert_eq!((1..=4).map(user1_position).collect::<Vec<_>>(), [1, 2, 5, 6]);
        assert_eq!((1..=4).map(user2_position).collect::<Vec<_>>(), [3, 4, 7, 8]);
        let (u1, u2) = demultiplex(&bits("10110001")).unwrap();
        assert_eq!(u1, bits("1000"));
        assert_eq!(u2, bits("1101"));
        assert_eq!(interleave(&u1, &u2).unwrap(), bits("10110001"));
        assert!(demultiplex(&bits("101100")).is_err());
    }

    #[test]
    fn positions_partition_exhaustively() {
        for m in (2..=64usize).step_by(2) {
            let mut seen = vec![false; 2 * m];
            for i in 1..=m {
                for p in [user1_position(i), user2_position(i)] {
                    assert!(!seen[p - 1]);
                    seen[p - 1] = true;
                }
                if i > 1 {
                    assert!(user1_position(i) > user1_position(i - 1));
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn ideal_session_is_lossless() {
        for seed in 0..5 {
            let cfg = SessionConfig {
                alpha: 1.0,
                channel: ChannelModel::new(10.0, 0.5, 0.2).unwrap(),
                detector_params: DetectorParams::laboratory(4),
                truncation: TruncationPolicy::default(),
                m: 64,
                seed,
                detector: DetectorKind::Ideal,
            };
            let r = run_session(&cfg).unwrap();
            assert_eq!(r.recovered_u1, r.sent_u1);
            assert_eq!(r.recovered_u2, r.sent_u2);
            assert_eq!(r.dealer.len(), 128);
            assert_eq!(r.symbol_errors, 0);
        }
    }

    #[test]
    fn session_is_deterministic() {
        let cfg = SessionConfig {
            alpha: 1.2,
            channel: ChannelModel::new(20.0, 0.5, 0.2).unwrap(),
            detector_params: DetectorParams::laboratory(3),
            truncation: TruncationPolicy::default(),
            m: 128,
            seed: 11,
            detector: DetectorKind::MonteCarlo,
        };
        let a = serde_json::to_string(&run_session(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_session(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let odd = SessionConfig { m: 5, ..cfg };
        assert!(run_session(&odd).is_err());
    }

    #[test]
    fn secret_sharing_examples() {
        let y = bits("1011");
        assert_eq!(encode_secret(&y, &y, &y).unwrap(), y);
        let k1 = bits("0110");
        let k2 = bits("1100");
        let e = encode_secret(&y, &k1, &k2).unwrap();
        assert_eq!(decode_secret(&e, &k1, &k2).unwrap(), y);
        assert_ne!(decode_secret(&e, &k1, &BitSequence::zeros(4)).unwrap(), y);
        assert!(encode_secret(&y, &bits("01"), &k2).is_err());
    }

    #[test]
    fn bit_sequence_serde() {
        let b = bits("0110");
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, "\"0110\"");
        assert_eq!(serde_json::from_str::<BitSequence>(&s).unwrap(), b);
        assert!("01x".parse::<BitSequence>().is_err());
    }

    proptest! {
        #[test]
        fn xor_round_trip(y in prop::collection::vec(any::<bool>(), 128),
                          a in prop::collection::vec(any::<bool>(), 128),
                          b in prop::collection::vec(any::<bool>(), 128)) {
            let (y, a, b) = (BitSequence::new(y), BitSequence::new(a), BitSequence::new(b));
            let e = encode_secret(&y, &a, &b).unwrap();
            prop_assert_eq!(decode_secret(&e, &a, &b).unwrap(), y);
        }

        #[test]
        fn demultiplex_interleave_round_trip(v in prop::collection::vec(any::<bool>(), 0..64usize)) {
            let mut v = v;
            v.truncate(v.len() / 4 * 4);
            let l = BitSequence::new(v);
            let (u1, u2) = demultiplex(&l).unwrap();
            prop_assert_eq!(interleave(&u1, &u2).unwrap(), l);
        }
    }
}
