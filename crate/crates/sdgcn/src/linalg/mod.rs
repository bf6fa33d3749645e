//! Complex dense/sparse matrix arithmetic and a Hermitian eigensolver.
//!
//! Everything downstream (graph operators, spectral filters, the model) sits
//! on these types. All values are immutable after construction and use a
//! fixed row-major summation order so repeated runs are bit-identical.

mod dense;
mod eig;
mod sparse;

pub use dense::{ComplexMatrix, RealMatrix};
pub use eig::{hermitian_eig, hermitian_eig_with_tol, SpectralDecomposition, HERMITIAN_TOL};
pub use sparse::SparseComplexMatrix;

pub use num_complex::Complex64;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |m(u,v) - conj(m(v,u))| = {max_deviation:.3e} exceeds {tol:.3e}")]
    NotHermitian { max_deviation: f64, tol: f64 },
    #[error("eigensolver failed to recover a full eigenbasis ({recovered} of {expected} vectors)")]
    EigenbasisIncomplete { recovered: usize, expected: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;
