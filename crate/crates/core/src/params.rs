//! Model parameters, parity labels and the error type shared by every module.
//!
//! Units follow the usual cavity-QED convention ω = ħ = 1, so every quantity
//! is dimensionless. The spectral parameter is x = E + g²; all spectrum
//! routines work in x and convert to energy only at the surface.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Couplings of the Rabi Hamiltonian
/// `H = a†a + g σx (a + a†) + ε σx + Δ σz`.
///
/// `epsilon = 0` is the parity-symmetric model; `epsilon != 0` breaks the
/// Z₂ symmetry and switches every consumer to the four-component embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Boson-qubit coupling strength, g > 0.
    pub g: f64,
    /// Qubit level splitting Δ (enters the coefficient recurrence only as Δ²).
    pub delta: f64,
    /// Symmetry-breaking σx bias ε.
    pub epsilon: f64,
}

impl ModelParams {
    /// Symmetric model (ε = 0).
    pub fn new(g: f64, delta: f64) -> Self {
        Self {
            g,
            delta,
            epsilon: 0.0,
        }
    }

    /// Broken-symmetry model.
    pub fn with_epsilon(g: f64, delta: f64, epsilon: f64) -> Self {
        Self { g, delta, epsilon }
    }

    /// `true` when the Z₂ parity is exact.
    pub fn is_symmetric(&self) -> bool {
        self.epsilon == 0.0
    }

    /// Energy corresponding to a spectral parameter: E = x − g².
    pub fn energy_of(&self, x: f64) -> f64 {
        x - self.g * self.g
    }

    /// Spectral parameter corresponding to an energy: x = E + g².
    pub fn x_of_energy(&self, energy: f64) -> f64 {
        energy + self.g * self.g
    }

    /// Rejects parameter combinations no module can work with.
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "coupling g must be positive and finite, got {}",
                self.g
            )));
        }
        if !self.delta.is_finite() || !self.epsilon.is_finite() {
            return Err(CoreError::InvalidParameter(
                "delta and epsilon must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Z₂ parity sector of the symmetric model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Plus,
    Minus,
}

impl Parity {
    /// Δ with the sign convention of this sector: the negative-parity
    /// G-function is the positive-parity one with Δ → −Δ.
    pub fn signed_delta(self, delta: f64) -> f64 {
        match self {
            Parity::Plus => delta,
            Parity::Minus => -delta,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Parity::Plus => Parity::Minus,
            Parity::Minus => Parity::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Plus => "+",
            Parity::Minus => "-",
        }
    }
}

/// Floating-point backend for the series and G-function evaluators.
///
/// `Auto` switches to double-double arithmetic for |x| > 30, where the
/// coefficient sums cancel too deeply for plain f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Precision {
    #[default]
    Auto,
    Double,
    Extended,
}

impl Precision {
    /// Threshold beyond which `Auto` selects the extended path.
    pub const AUTO_EXTENDED_ABOVE: f64 = 30.0;

    pub(crate) fn use_extended(self, x: f64) -> bool {
        match self {
            Precision::Double => false,
            Precision::Extended => true,
            Precision::Auto => x.abs() > Self::AUTO_EXTENDED_ABOVE,
        }
    }
}

/// Errors shared across the solver.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("x = {x} is within {dist:.3e} of the series pole at x = {pole} (exclusion window {window:.1e})")]
    PoleProximity {
        x: f64,
        pole: f64,
        dist: f64,
        window: f64,
    },

    #[error("tail criterion not met after {n_max} terms (weighted tail {tail:.3e})")]
    NoConvergence { n_max: usize, tail: f64 },

    #[error("z = {z} is a regular singular point of the system")]
    SingularPoint { z: Complex64 },

    #[error("grid point z = {z} is outside the admissible region of D1")]
    GridOutsideDomain { z: Complex64 },

    #[error("z0 = {z0} is outside D0 = D1 ∩ D2; both local expansions must converge there")]
    OutsideD0 { z0: Complex64 },

    #[error("integration path [{start}, {end}] passes within {dist:.3e} of z = ±g (minimum {min_allowed:.3e})")]
    PathTooCloseToSingularity {
        start: Complex64,
        end: Complex64,
        dist: f64,
        min_allowed: f64,
    },

    #[error("adaptive step size underflowed at z = {z}")]
    StepUnderflow { z: Complex64 },

    #[error("no joint zero in bracket ({lo}, {hi}): |Im G| = {im:.3e} at the Re-zero, allowed {allowed:.3e}")]
    NoJointZero {
        lo: f64,
        hi: f64,
        im: f64,
        allowed: f64,
    },

    #[error("residue extrapolation did not settle (spread {spread:.3e})")]
    ResidueNoConvergence { spread: f64 },

    #[error("no degenerate pair found in the scanned parameter range")]
    NotFound,

    #[error("oracle level near E = {energy} lies outside the converged window (N_fock = {n_fock})")]
    LevelNotConverged { energy: f64, n_fock: usize },

    #[error("eigensolver failed to converge for the {dim}x{dim} matrix")]
    EigensolverFailed { dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
