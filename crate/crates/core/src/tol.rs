//! Numerical tolerance conventions used throughout the crate.
//!
//! Dense arithmetic on operators of dimension ≤ 4096 keeps rounding error
//! comfortably below these thresholds, so they separate "numerical noise"
//! from "genuinely invalid input" without ambiguity at the working scale.

/// Relative self-adjointness tolerance: a matrix `M` counts as Hermitian when
/// the largest entrywise deviation `|M − M†|` is at most this multiple of the
/// operator norm of `M`.
pub const HERMITICITY_REL: f64 = 1e-12;

/// Absolute eigenvalue gap below which two eigenvalues are treated as a
/// degenerate cluster and share a canonical eigenbasis.
pub const EIG_CLUSTER_GAP: f64 = 1e-10;

/// Residual norm below which a projected standard basis vector is rejected
/// during the deterministic Gram–Schmidt pass over a degenerate cluster.
pub const GS_RESIDUAL: f64 = 1e-8;

/// Eigenvalues of nominally PSD operators in `[-PSD_CLAMP, 0)` are clamped to
/// zero before square roots or inversions.
pub const PSD_CLAMP: f64 = 1e-10;

/// An eigenvalue below `-PSD_ERROR` on a nominally PSD operator signals
/// genuinely non-PSD input and is reported as an error rather than clamped.
pub const PSD_ERROR: f64 = 1e-8;

/// Relative rank threshold: eigenvalues at or below `RANK_REL · ‖H‖` count as
/// kernel when forming pseudo-inverses.
pub const RANK_REL: f64 = 1e-12;

/// Default tolerance for Löwner-order comparisons (`A ≤ B` iff the minimum
/// eigenvalue of `B − A` is at least `-LOEWNER`).
pub const LOEWNER: f64 = 1e-9;

/// POVM completeness tolerance: operator-norm distance of the element sum
/// from the identity.
pub const COMPLETENESS: f64 = 1e-9;

/// Probability weights at or below this threshold are treated as zero when
/// forming canonical ensembles or post-measurement states.
pub const WEIGHT: f64 = 1e-12;

/// Tolerance for scalar norm/trace consistency checks.
pub const NORM_CHECK: f64 = 1e-10;

/// Product weights `λ^l` below this floor are excluded from sampling support
/// to guard against floating-point underflow.
pub const LAMBDA_UNDERFLOW: f64 = 1e-300;

/// Relative slack applied on the cutoff eigenvalue threshold so that
/// eigenvalues sitting exactly at the threshold (a common occurrence for
/// highly symmetric inputs) are kept regardless of rounding direction.
pub const CUTOFF_REL_SLACK: f64 = 1e-9;

/// Default enumeration cap on the product eigenbasis dimension `d^l`.
pub const CAP_DIM: usize = 4096;

/// Default enumeration cap on the number of classical words `m^l`.
pub const CAP_WORDS: usize = 65536;
