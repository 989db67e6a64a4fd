//! Minimal dense complex linear algebra: Hermitian products and solves,
//! rank-one inverse updates and Hermitian eigenproblems.

mod eigen;
mod matrix;
mod solve;

pub use eigen::{canonical_phase, deflate_power_step, hermitian_eigen, singular_values, smallest_eigvec};
pub use matrix::{hermitian, ComplexMatrix, ComplexVector, C64, ONE, ZERO};
pub use solve::{
    inverse_hermitian, mil_update, rank_one_inverse_update, solve_hermitian, Cholesky,
    DEGENERATE_DENOMINATOR, PD_RELATIVE_TOL,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square, got {rows}×{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("rank-one update is degenerate (denominator {denominator:e})")]
    DegenerateUpdate { denominator: f64 },
    #[error("eigensolver did not converge (relative residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `(A)^p` for a square matrix and nonnegative integer `p`.
pub fn matrix_power(a: &ComplexMatrix, p: u32) -> ComplexMatrix {
    assert!(a.is_square());
    let mut result = ComplexMatrix::identity(a.rows());
    let mut base = a.clone();
    let mut e = p;
    while e > 0 {
        if e & 1 == 1 {
            result = result.matmul(&base);
        }
        e >>= 1;
        if e > 0 {
            base = base.matmul(&base);
        }
    }
    result
}

/// Alignment `|⟨a, b⟩| / (‖a‖‖b‖)`, in `[0, 1]`.
pub fn alignment(a: &ComplexVector, b: &ComplexVector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(b).norm() / (na * nb)).min(1.0)
}
