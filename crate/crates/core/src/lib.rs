//! Spectral solver for the quantum Rabi model and its broken-symmetry
//! generalization.
//!
//! The regular spectrum is computed as real zeros of a transcendental
//! G-function built from three-term-recurrence coefficients; every claim is
//! cross-checkable against an independent truncated-diagonalization oracle
//! and against residuals of the underlying first-order ODE system.
//!
//! Module map:
//! - [`series`] — coefficient recurrences K_n(x), K_n^±(x) and the
//!   ODE-residual oracle that certifies them,
//! - [`gfunction`] — G_±(x), the generalized G_±(x; z) and the ε-model
//!   G_ε(x), plus numerical pole residues,
//! - [`spectrum`] — pole-aware bracketing, bisection, joint Re/Im zero
//!   finding and exceptional-level detection,
//! - [`validate`] — complex-plane ODE integration, matching conditions and
//!   the vanish-everywhere check,
//! - [`oracle`] — dense diagonalization of the truncated Hamiltonian with
//!   parity labels and convergence certificates.

pub mod gfunction;
pub mod numeric;
pub mod oracle;
pub mod params;
pub mod series;
pub mod spectrum;
pub mod validate;

pub use params::{CoreError, ModelParams, Parity, Precision, Result};
pub use series::{
    compute_k, compute_k_eps, ode_residual, ode_residual_eps, EpsBranch, SeriesExpansion,
    DEFAULT_N_MAX, DEFAULT_TAIL_TOL, DELTA_POLE,
};
