//! Numerical simulation of two-photon temporal interference.
//!
//! A biphoton amplitude `A(t1, t2)` is sampled on a uniform grid
//! ([`grid`]), built from a pump and source kernels ([`source`]), sent
//! through delays, a beam splitter and a compensator ([`optics`]), and
//! analysed through coincidence rates ([`correlations`]), amplitude overlap
//! ([`overlap`]) and its Schmidt decomposition ([`entanglement`]). Bench files
//! ([`bench`]) describe whole runs.

pub mod bench;
pub mod correlations;
pub mod entanglement;
pub mod error;
pub mod grid;
pub mod optics;
pub mod output;
pub mod overlap;
pub mod source;

pub use error::{Error, Result};
