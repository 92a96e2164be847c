//! Error type shared across the crate.
//!
//! Every fallible operation returns [`Result`]. The variants mirror the
//! validation gates of the toolkit: most carry a short human-readable detail
//! string describing which quantity failed and by how much.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numeric kernels, model validation, and solvers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A matrix is numerically rank deficient where full column rank is
    /// required (triangular diagonal below the relative threshold).
    RankDeficient(String),
    /// A matrix fails the relative symmetry gate of the eigensolver.
    NotSymmetric(String),
    /// A triangular system has a zero diagonal entry.
    Singular(String),
    /// Dimensions are inconsistent with the operation's contract.
    BadShape(String),
    /// A stepsize or relaxation parameter is outside its admissible set.
    BadStepsize(String),
    /// A scalar argument is outside its admissible interval.
    OutOfRange(String),
    /// A spectrum argument is malformed (wrong ordering, empty, bad rank).
    BadSpectrum(String),
    /// Too few values were supplied for the requested computation.
    TooFew(String),
    /// A problem does not satisfy the orthonormal-blocks assumption
    /// required by the fast solver path.
    NotBWO(String),
    /// A claimed orthonormal basis fails the orthonormality gate.
    NotOrthonormal(String),
    /// A trace is too short, or fully converged, before the fitting window.
    InsufficientTail(String),
}

impl Error {
    /// The detail message carried by the variant.
    pub fn detail(&self) -> &str {
        match self {
            Error::RankDeficient(s)
            | Error::NotSymmetric(s)
            | Error::Singular(s)
            | Error::BadShape(s)
            | Error::BadStepsize(s)
            | Error::OutOfRange(s)
            | Error::BadSpectrum(s)
            | Error::TooFew(s)
            | Error::NotBWO(s)
            | Error::NotOrthonormal(s)
            | Error::InsufficientTail(s) => s,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::RankDeficient(s) => write!(f, "rank deficient: {s}"),
            Error::NotSymmetric(s) => write!(f, "not symmetric: {s}"),
            Error::Singular(s) => write!(f, "singular triangular system: {s}"),
            Error::BadShape(s) => write!(f, "bad shape: {s}"),
            Error::BadStepsize(s) => write!(f, "bad stepsize: {s}"),
            Error::OutOfRange(s) => write!(f, "out of range: {s}"),
            Error::BadSpectrum(s) => write!(f, "bad spectrum: {s}"),
            Error::TooFew(s) => write!(f, "too few values: {s}"),
            Error::NotBWO(s) => write!(f, "blockwise orthonormality violated: {s}"),
            Error::NotOrthonormal(s) => write!(f, "not orthonormal: {s}"),
            Error::InsufficientTail(s) => write!(f, "insufficient tail: {s}"),
        }
    }
}

impl std::error::Error for Error {}
