use thiserror::Error;

use crate::algebra::Family;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degree limit exceeded: word of length {degree} > maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("mode index {mode} out of range 1..={modes}")]
    BadModeIndex { mode: usize, modes: usize },

    #[error("operands disagree on mode count ({left} vs {right})")]
    ModeMismatch { left: usize, right: usize },

    #[error("non-finite coefficient")]
    NonFinite,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown variable '{name}' at line {line}, column {column}")]
    UnknownVariable {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("exponent {exponent} exceeds maximum degree {max} at line {line}, column {column}")]
    ExponentOverflow {
        exponent: u64,
        max: usize,
        line: usize,
        column: usize,
    },

    #[error("Fock space dimension {dimension} exceeds budget {budget}")]
    DimensionBudget { dimension: usize, budget: usize },

    #[error("generator family {0:?} is not available in this space")]
    FamilyMismatch(Family),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("truncation tail {tail:.3e} exceeds budget {budget:.1e}; use cutoff >= {suggested_cutoff}")]
    TailViolation {
        tail: f64,
        budget: f64,
        suggested_cutoff: usize,
    },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("invalid step size {0}")]
    InvalidStep(f64),

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("operator contains daggered generator; only annihilators are expressible here")]
    Daggered,

    #[error("transcription guard '{check}' failed: residual {residual:.3e} > {threshold:.1e}")]
    TranscriptionGuard {
        check: String,
        residual: f64,
        threshold: f64,
    },

    #[error("ill-conditioned solve (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("point is not an equilibrium (residual {residual:.3e})")]
    NonEquilibrium { residual: f64 },

    #[error("degenerate equilibrium: Hessian eigenvalue {eigenvalue:.3e} too close to zero")]
    DegenerateEquilibrium { eigenvalue: f64 },

    #[error("root solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unstable integration: {0}")]
    Unstable(String),

    #[error("degenerate calibration samples: {0}")]
    DegenerateSamples(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
