//! Measurement statistics of pre- and post-selected weak measurements.
//!
//! A two-level system prepared in `(α, β)` is weakly coupled to the transverse
//! coordinate of a Gaussian beam of width `w`: the two spin components are
//! displaced by `±d`. A strong measurement then projects onto `(γ, δ)` (the
//! retained channel) or its orthogonal complement `(δ*, −γ*)`.
//!
//! The crate provides
//!
//! - [`model`]: every closed-form distribution and mean value, exact and
//!   expanded, plus the weak value of `σ_z`;
//! - [`detuning`]: the amplitude/phase detuning parametrization around the
//!   post-state orthogonal to the pre-state, and the small-detuning response
//!   formulas;
//! - [`oracle`]: brute-force quadrature in position and momentum space that
//!   checks the closed forms independently;
//! - [`sampler`]: seeded Born-rule Monte Carlo detection events;
//! - [`estimation`]: recovery of the weakness ratio `η = d/w` from response
//!   sweeps.
//!
//! Mean values are dimensionless: positions are in units of `w`, momenta in
//! units of `w_p = ħ/(2w)`. Densities take physical coordinates.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod complex;
pub mod detuning;
pub mod error;
pub mod estimation;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod sampler;
pub mod state;

pub use complex::ComplexAmp;
pub use error::{Error, Result};
pub use state::{BeamGeometry, Channel, DetuningParams, MeasurementSetup, Observable, SpinState};

/// Below this overlap magnitude a pair of states counts as orthogonal, and
/// below this amplitude magnitude a phase counts as undefined.
pub const TAU_ORTH: f64 = 1e-12;

/// Post-selection probabilities at or below this value are treated as zero.
pub const TAU_PROB: f64 = 1e-14;
