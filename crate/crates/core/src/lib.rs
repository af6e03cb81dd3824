//! # pskhad
//!
//! Information rates of multi-phase PSK Hadamard codes on the pure-loss bosonic
//! channel (received-energy normalization, no further loss).
//!
//! A PSK Hadamard code of order `M` and length `n` is the set of `Mn` product
//! coherent states whose sign patterns are the columns of the `n×n` Hadamard
//! matrix and whose common amplitude carries one of `M` equally spaced phases.
//! A passive `n`-mode unitary maps every codeword to a pulse-position codeword
//! with a single pulse of energy `ℰ = nE`.
//!
//! The crate is organized by stage:
//!
//! - [`hadamard`]: Hadamard matrices, codewords and the receiver transform.
//! - [`spectra`]: spectrum of the code's average state, the optimal (Holevo)
//!   rate, the channel capacity and a brute-force Gram-matrix oracle.
//! - [`quadrature`]: adaptive Gauss–Kronrod engine shared by the detection
//!   integrals.
//! - [`detection`]: Helstrom, vacuum-or-pulse and nulling-hierarchy conditional
//!   probabilities assembled into confusion tables.
//! - [`rates`]: mutual-information rates, envelopes over code lengths and
//!   relative gains.
//! - [`simulator`]: Monte Carlo photodetection of the splitting cascade.
//!
//! Energies are mean photon numbers. Rates are bits per mode.

#![forbid(unsafe_code)]

pub mod detection;
pub mod error;
pub mod grid;
pub mod hadamard;
pub mod quadrature;
pub mod rates;
pub mod simulator;
pub mod spectra;

pub use error::{Error, Result};
pub use hadamard::{CodeParams, CoherentCodeword, HadamardMatrix};
pub use num_complex::Complex64;
pub use quadrature::QuadratureConfig;
