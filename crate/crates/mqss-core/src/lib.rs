//! Simulator for a three-party single-photon secret sharing scheme, the
//! multi-photon Trojan attack the signal preparer can mount against it, and a
//! hardened protocol variant that detects the attack with splitter checks,
//! a fourth encryption unitary, and decoy photons.
//!
//! Everything is deterministic given a seed: runs, Monte Carlo trials and
//! reports reproduce bit-for-bit.

pub mod attack;
pub mod error;
pub mod harness;
pub mod photonics;
pub mod protocol;
pub mod qubit;
pub mod rng;
pub mod transcript;

pub use error::{Result, SimError};
pub use rng::RandomStream;
