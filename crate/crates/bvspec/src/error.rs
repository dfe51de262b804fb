//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("void boundary condition: row {row} has both polynomials zero")]
    VoidCondition { row: usize },

    #[error("boundary condition row {row} has degree {degree}, must be below the operator order {order}")]
    DegreeTooLarge {
        row: usize,
        degree: usize,
        order: usize,
    },

    #[error("operator order must be at least 2, got {0}")]
    OrderTooSmall(usize),

    #[error("invalid segment: left endpoint {a} must be below right endpoint {b}")]
    InvalidSegment { a: f64, b: f64 },

    #[error("boundary conditions are rank deficient: row {row} vanished during normalization")]
    RankDeficient { row: usize },

    #[error("boundary conditions are not Birkhoff regular (singular value ratio {ratio:.3e})")]
    NotRegular { ratio: f64 },

    #[error("near-eigenvalue evaluation: |char det| = {value:.3e} is below threshold {threshold:.3e}")]
    NearEigenvalue { value: f64, threshold: f64 },

    #[error("direction lies on a sector boundary, split index is undefined")]
    SectorBoundary,

    #[error("root localization failure: winding count {expected} but {found} roots polished")]
    LocalizationFailure { expected: usize, found: usize },

    #[error("root search exceeded radius {radius:.3} with only {found} roots found")]
    RootSearchExhausted { radius: f64, found: usize },

    #[error("grid size {got} too small, need at least {min}")]
    GridTooSmall { got: usize, min: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("endpoint averaged limit did not resolve: successive estimates differ by {diff:.3e}")]
    LimitNotResolved { diff: f64 },

    #[error("quadrature did not converge: last refinement changed the value by {change:.3e}")]
    QuadratureNotConverged { change: f64 },

    #[error("empty sample set: {0}")]
    EmptySamples(&'static str),

    #[error("eigenvalue within {dist:.3e} of the integration contour")]
    EigenvalueOnContour { dist: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("linear algebra backend error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
