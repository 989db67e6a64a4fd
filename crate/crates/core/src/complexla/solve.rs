//! Hermitian positive-definite solves and rank-one inverse updates.

use super::matrix::{ComplexMatrix, ComplexVector, C64, ZERO};
use super::LinalgError;

/// Relative pivot threshold for positive-definiteness.
pub const PD_RELATIVE_TOL: f64 = 1e-12;

/// Denominator magnitude below which a rank-one update is rejected.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

/// Lower-triangular Cholesky factor `L` with `A = L Lᴴ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: ComplexMatrix,
}

impl Cholesky {
    pub fn new(a: &ComplexMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
        }
        let n = a.rows();
        let threshold = PD_RELATIVE_TOL * a.max_abs_diag();
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > threshold) || d <= 0.0 {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = C64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &ComplexMatrix {
        &self.l
    }

    pub fn solve_vec(&self, b: &ComplexVector) -> ComplexVector {
        let n = self.l.rows();
        assert_eq!(b.len(), n, "solve_vec: dimension mismatch");
        let mut y = vec![ZERO; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)].conj() * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        ComplexVector::from_vec(y)
    }

    pub fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let mut x = ComplexMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            x.set_column(j, &self.solve_vec(&b.column(j)));
        }
        x
    }

    pub fn inverse(&self) -> ComplexMatrix {
        let mut inv = self.solve(&ComplexMatrix::identity(self.l.rows()));
        inv.symmetrize();
        inv
    }
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hermitian(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    Ok(Cholesky::new(a)?.solve(b))
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inverse_hermitian(a: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    Ok(Cholesky::new(a)?.inverse())
}

/// Matrix-inversion-lemma update.
///
/// Given `pinv = P⁻¹`, returns `(forget · P + gain · x xᴴ)⁻¹` without ever
/// forming `P`. `forget` must lie in `(0, 1]` and `gain` must be nonnegative;
/// [`rank_one_inverse_update`] lifts both restrictions.
pub fn mil_update(
    pinv: &ComplexMatrix,
    x: &ComplexVector,
    forget: f64,
    gain: f64,
) -> Result<ComplexMatrix, LinalgError> {
    if !(forget > 0.0 && forget <= 1.0) {
        return Err(LinalgError::InvalidArgument(format!(
            "forgetting factor {forget} outside (0, 1]"
        )));
    }
    if !(gain >= 0.0) {
        return Err(LinalgError::InvalidArgument(format!("negative gain {gain}")));
    }
    let mut out = pinv.clone();
    rank_one_inverse_update(&mut out, x, forget, gain)?;
    Ok(out)
}

/// In-place `inv ← (scale · inv⁻¹ + coeff · x xᴴ)⁻¹` for any nonzero real
/// `scale` and real `coeff` (negative `coeff` is a downdate).
///
/// Returns `inv · x` before the update, which callers propagating the same
/// rank-one change into other quantities need.
pub fn rank_one_inverse_update(
    inv: &mut ComplexMatrix,
    x: &ComplexVector,
    scale: f64,
    coeff: f64,
) -> Result<ComplexVector, LinalgError> {
    let n = inv.rows();
    if !inv.is_square() {
        return Err(LinalgError::NotSquare { rows: n, cols: inv.cols() });
    }
    if x.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: x.len() });
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(LinalgError::InvalidArgument(format!("scale {scale} must be finite and nonzero")));
    }
    let u = inv.mul_vec(x);
    let rel = coeff / scale;
    if rel == 0.0 {
        if scale != 1.0 {
            *inv = inv.scale_real(1.0 / scale);
        }
        return Ok(u);
    }
    let quad = x.dot(&u).re;
    let denom = 1.0 + rel * quad;
    if denom.abs() < DEGENERATE_DENOMINATOR || !denom.is_finite() {
        return Err(LinalgError::DegenerateUpdate { denominator: denom });
    }
    let kappa = rel / denom;
    let inv_scale = 1.0 / scale;
    for i in 0..n {
        let ku = kappa * u[i];
        for j in 0..n {
            let v = inv[(i, j)] - ku * u[j].conj();
            inv[(i, j)] = v * inv_scale;
        }
    }
    Ok(u)
}
