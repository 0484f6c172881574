//! Error type shared across the library.

use std::fmt;

/// Errors produced by geometry, noise, detection, bound, and simulation
/// routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input matrix does not have full column rank at the working tolerance.
    RankDeficient { rank_bound: usize, needed: usize },
    /// Operand dimensions are incompatible.
    DimensionMismatch { expected: String, got: String },
    /// Matrix is not symmetric at the working tolerance.
    NotSymmetric { max_asymmetry: f64 },
    /// Matrix is not positive definite (smallest eigenvalue too small or negative).
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },
    /// Sample covariance needs strictly more samples than the ambient dimension.
    TooFewSamples { samples: usize, ambient_dim: usize },
    /// A matrix expected to be well conditioned is numerically singular.
    NearSingular { min_eig: f64, max_eig: f64 },
    /// Supplied directions are not orthonormal / not orthogonal to the base.
    NotOrthogonal { max_violation: f64 },
    /// The ambient space is too small for the requested construction.
    InsufficientAmbientDim { ambient_dim: usize, needed: usize },
    /// A detector was invoked on a `PreparedUnion` built for another noise regime.
    RegimeMismatch { expected: String, got: String },
    /// A statistic's denominator is zero (degenerate observation).
    DivisionByZero,
    /// Scalar argument outside the domain of a special function.
    DomainError { what: String },
    /// A series did not converge within its iteration cap.
    ConvergenceError { what: String },
    /// Joint-probability denominator is zero while the marginal is positive.
    DegenerateJoint { index: usize },
    /// Not enough Monte-Carlo trials for the requested quantile.
    TooFewTrials { trials: usize, needed: usize },
    /// Invalid configuration value.
    InvalidConfig { what: String },
    /// I/O or parse failure on a matrix/CSV file.
    Io { what: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::RankDeficient { rank_bound, needed } => {
                write!(f, "rank deficient: numerical rank <= {rank_bound}, need {needed}")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NotSymmetric { max_asymmetry } => {
                write!(f, "matrix not symmetric (max |a - a^T| = {max_asymmetry:.3e})")
            }
            Error::NotPositiveDefinite { min_eig, max_eig } => {
                write!(f, "matrix not positive definite (eigenvalues in [{min_eig:.3e}, {max_eig:.3e}])")
            }
            Error::TooFewSamples { samples, ambient_dim } => {
                write!(f, "need more than {ambient_dim} training samples for a non-singular estimate, got {samples}")
            }
            Error::NearSingular { min_eig, max_eig } => {
                write!(f, "matrix numerically singular (eigenvalues in [{min_eig:.3e}, {max_eig:.3e}])")
            }
            Error::NotOrthogonal { max_violation } => {
                write!(f, "directions not orthogonal (max violation {max_violation:.3e})")
            }
            Error::InsufficientAmbientDim { ambient_dim, needed } => {
                write!(f, "ambient dimension {ambient_dim} too small, need at least {needed}")
            }
            Error::RegimeMismatch { expected, got } => {
                write!(f, "noise regime mismatch: detector expects {expected}, prepared for {got}")
            }
            Error::DivisionByZero => write!(f, "statistic denominator is zero"),
            Error::DomainError { what } => write!(f, "domain error: {what}"),
            Error::ConvergenceError { what } => write!(f, "series failed to converge: {what}"),
            Error::DegenerateJoint { index } => {
                write!(f, "degenerate joint probabilities for event {index}: zero denominator with positive marginal")
            }
            Error::TooFewTrials { trials, needed } => {
                write!(f, "too few trials: got {trials}, need at least {needed}")
            }
            Error::InvalidConfig { what } => write!(f, "invalid configuration: {what}"),
            Error::Io { what } => write!(f, "io error: {what}"),
        }
    }
}

impl std::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
