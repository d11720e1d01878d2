//! Rejection-free classical Metropolis sampling and its measurement-based
//! quantum extension, with Gaussian-filtered quantum phase estimation (GQPE)
//! realized as an exact POVM and as a simulated circuit.
//!
//! The crate also carries brute-force oracles for the branch kernels and
//! branch superoperators, which check detailed balance and Gibbs
//! stationarity on small instances.

pub mod classical;
pub mod delay;
pub mod error;
pub mod gqpe;
pub mod ledger;
pub mod linalg;
pub mod models;
pub mod par;
pub mod qoracle;
pub mod quantum;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
