//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A topology spec violates its own invariants.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Rejection sampling could not satisfy the placement constraints.
    #[error("infeasible spec: {reason} (gave up after {attempts} attempts)")]
    InfeasibleSpec { reason: String, attempts: usize },

    /// Green's function evaluated at (numerically) coincident points.
    #[error("self-interaction undefined: separation {separation:.3e} m below threshold")]
    SelfInteraction { separation: f64 },

    #[error("tuning value {value} at index {index} outside [0, 1]")]
    TuningOutOfRange { index: usize, value: f64 },

    #[error("tuning length mismatch: expected {expected}, got {actual}")]
    TuningLengthMismatch { expected: usize, actual: usize },

    /// Interaction matrix is singular or too ill-conditioned to trust.
    #[error(
        "degenerate system: condition estimate {condition:.3e} at {frequency:.6e} Hz (topology seed {seed})"
    )]
    DegenerateSystem {
        condition: f64,
        frequency: f64,
        seed: u64,
    },

    /// Woodbury update addressed a scatterer that is not a meta-atom.
    #[error("update index {index} is not a meta-atom (n_meta = {n_meta})")]
    NotAMetaAtom { index: usize, n_meta: usize },

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    #[error("null pattern: cannot normalize an all-zero field map")]
    NullPattern,

    #[error("ROI grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid ROI: {0}")]
    InvalidRoi(String),

    #[error("invalid target set: {0}")]
    InvalidTarget(String),

    /// A solution was paired with a topology it was not computed from.
    #[error("fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    /// Train/test sets share samples, or a set is empty.
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
