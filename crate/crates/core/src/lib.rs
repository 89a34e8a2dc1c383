//! Channel models and low-complexity ICI equalization for MIMO-OFDM downlinks
//! served by distributed trackside antennas (RRUs) under high mobility.
//!
//! Every LOS path from a remote radio unit reaches the train with its own
//! carrier frequency offset `ε = ω_D cos θ`, so the subcarrier leakage is a
//! weighted sum of single-CFO interference matrices. The crate builds those
//! matrices in structured (Toeplitz / circulant) form, assembles the
//! Kronecker-factored channel `S = Σ w_t (I_t ⊗ G)`, applies the normalized
//! transpose equalizers, and evaluates exact and closed-form SIR figures.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! experiment drivers live in the `hsr-ici-sim` companion crate.
//!
//! Module map:
//! - [`geometry`]: corridor layout, angles of arrival, path loss, dominant RRUs
//! - [`ici`]: ICI kernels and matrices for LOS and aggregated NLOS paths
//! - [`channel`]: composite LOS / Rician channel, frame transmission
//! - [`equalize`]: the LOS and Rician transpose equalizers and their gains
//! - [`analysis`]: Λ closed forms, exact SIR, bounds, K-factor statistics, ASQ
//! - [`oracle`]: brute-force verifiers (scatterer sums, dense assembly, Monte Carlo SIR)

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod channel;
pub mod equalize;
mod error;
pub mod geometry;
pub mod ici;
pub mod oracle;
pub mod structured;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Conventions that the closed-form analysis leaves implicit.
///
/// The defaults are the ones under which the transpose equalizers behave as
/// the algorithms describe: a real-valued LOS kernel and a plain transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Conventions {
    pub kernel: ici::LosKernel,
    pub adjoint: equalize::Adjoint,
}
