//! Numerical model of a (2,2) continuous-variable quantum secret sharing
//! scheme whose dealer measures with an adaptive state-discrimination
//! detector (SDD).
//!
//! The crate is organised bottom-up:
//!
//! * [`constellation`] builds the two QPSK sources, the lossy channel and the
//!   16-point mixed constellation received by the dealer, plus the states
//!   tapped by a beam-splitting eavesdropper.
//! * [`sdd`] implements the detector: displaced-thermal photon statistics,
//!   Bayesian MAP feedback, exhaustive outcome-tree enumeration and a seeded
//!   Monte Carlo simulator.
//! * [`security`] computes mutual information, Holevo quantities through
//!   Gram-matrix spectra, and the asymptotic (optionally post-selected) key
//!   rates.
//! * [`bounds`] provides the SQL, Helstrom, heterodyne and PLOB benchmarks.
//! * [`protocol`] runs a bit-level session including the XOR secret split.

pub mod bounds;
pub mod constellation;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod sdd;
pub mod security;

pub use error::{Error, Result};
