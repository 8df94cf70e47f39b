//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix that must be square is not.
    #[error("matrix is not square: {rows}×{cols}")]
    NonSquare { rows: usize, cols: usize },

    /// Self-adjointness violated beyond tolerance.
    #[error("matrix is not Hermitian: max |M − M†| = {gap:.3e} exceeds {limit:.3e}")]
    NotHermitian { gap: f64, limit: f64 },

    /// A nominally PSD operator has a significantly negative eigenvalue.
    #[error("operator is not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },

    /// Operand dimensions do not match.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A quantum-object invariant (trace, completeness, normalization, …)
    /// fails beyond tolerance.
    #[error("invalid {object}: {context}")]
    InvalidObject { object: &'static str, context: String },

    /// Word or basis enumeration would exceed the configured cap.
    #[error("enumeration cap exceeded: {needed} > {cap} ({context})")]
    CapExceeded { needed: usize, cap: usize, context: &'static str },

    /// All canonical-ensemble weights fell below the weight tolerance.
    #[error("all ensemble weights are below the weight tolerance {0:.1e}")]
    AllWeightsZero(f64),

    /// A probability weight required to be positive is (numerically) zero.
    #[error("outcome {outcome} is unreachable: weight {weight:.3e} below tolerance")]
    UnreachableOutcome { outcome: usize, weight: f64 },

    /// The cutoff scale α degenerated to zero.
    #[error("degenerate cutoff scale: exact_alpha = {0:.3e}")]
    DegenerateAlpha(f64),

    /// The outcome-count lower bound does not apply at the given ε.
    #[error("lower bound inapplicable: ε = {eps:.3e} outside (0, {limit:.3e}]")]
    LowerBoundInapplicable { eps: f64, limit: f64 },

    /// A lemma or check was invoked with its premise violated.
    #[error("premise violated: {0}")]
    PremiseViolated(String),

    /// Configuration or interchange-format problem.
    #[error("config error: {0}")]
    Config(String),

    /// JSON (de)serialization failure.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Underlying I/O failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenient result alias for fallible operations in this crate.
pub type Result<T> = std::result::Result<T, Error>;
