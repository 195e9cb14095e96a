//! Dense linear algebra: square matrices, vector and induced matrix norms,
//! and matrix measures (logarithmic norms) with similarity scaling.

mod matrix;
mod norm;

pub use matrix::{LuDecomposition, SquareMatrix};
pub use norm::{
    coeff_c, coeff_d, default_eps_ladder, mu_limit_oracle, BaseNorm, Norm, CONDITION_CAP,
};

use thiserror::Error;

/// Errors from matrix construction, factorization, and norm evaluation.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("expected {expected} entries for a {n}x{n} matrix, got {got}")]
    BadEntryCount { n: usize, expected: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("matrix is numerically singular (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("scaling matrix condition estimate {cond:.3e} exceeds the cap {cap:.1e}")]
    IllConditioned { cond: f64, cap: f64 },
    #[error("epsilon ladder must be non-empty, strictly decreasing, and positive")]
    BadEpsLadder,
}
