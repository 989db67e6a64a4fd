//! Hermitian eigenproblems: a cyclic complex Jacobi solver, minimum-eigenvector
//! extraction and the shifted power-method step used by the channel tracker.

use super::matrix::{ComplexMatrix, ComplexVector, C64};
use super::LinalgError;

const MAX_SWEEPS: usize = 100;

/// Full eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order; column `j` of the returned
/// matrix is the unit eigenvector for eigenvalue `j`.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();
    if n <= 1 || scale == 0.0 {
        let vals = (0..n).map(|i| m[(i, i)].re).collect();
        return Ok((vals, v));
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&m);
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q, scale);
            }
        }
    }
    if !converged {
        let off = off_diagonal_norm(&m);
        if off > 1e-12 * scale {
            return Err(LinalgError::NoConvergence { residual: off / scale });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let vals = order.iter().map(|&i| m[(i, i)].re).collect();
    let vecs = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((vals, vecs))
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, scale: f64) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r <= 1e-300 || r < 1e-18 * scale {
        return;
    }
    let phase = apq / r;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // U restricted to (p, q): [[c, s], [-s·φ̄, c·φ̄]] with φ = apq/|apq|.
    let pc = phase.conj();
    let n = m.rows();
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * c - akq * pc * s;
        m[(k, q)] = akp * s + akq * pc * c;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * pc * s;
        v[(k, q)] = vkp * s + vkq * pc * c;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk * c - aqk * phase * s;
        m[(q, k)] = apk * s + aqk * phase * c;
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
}

/// Singular values of `a` in descending order (one-sided Jacobi on the columns).
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    let work = if a.rows() >= a.cols() { a.clone() } else { a.h() };
    let (rows, n) = work.shape();
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..rows).map(|i| work[(i, j)]).collect()).collect();
    let negligible = (1e-14 * work.frobenius_norm()).powi(2);
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut worst = 0.0f64;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                let r = gamma.norm();
                if r == 0.0 || alpha.min(beta) <= negligible || r <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                worst = worst.max(r / (alpha * beta).sqrt());
                let phase = gamma / r;
                let tau = (beta - alpha) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let pc = phase.conj();
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = xp * c - xq * pc * s;
                    *y = xp * s + xq * pc * c;
                }
            }
        }
        converged = worst <= 1e-13;
    }
    if !converged {
        return Err(LinalgError::NoConvergence { residual: f64::NAN });
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
pub fn canonical_phase(v: &ComplexVector) -> ComplexVector {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag <= 0.0 {
        return v.clone();
    }
    v.scale(v[best].conj() / best_mag)
}

/// Minimum eigenvalue of a Hermitian matrix and its unit eigenvector,
/// phase-normalised by [`canonical_phase`].
pub fn smallest_eigvec(a: &ComplexMatrix) -> Result<(f64, ComplexVector), LinalgError> {
    let (vals, vecs) = hermitian_eigen(a)?;
    if vals.is_empty() {
        return Err(LinalgError::NotSquare { rows: 0, cols: 0 });
    }
    Ok((vals[0], canonical_phase(&vecs.column(0))))
}

/// One unnormalised step of the shifted power method: `(I − shift·Γ) g`.
pub fn deflate_power_step(
    g: &ComplexVector,
    gamma: &ComplexMatrix,
    shift: f64,
) -> Result<ComplexVector, LinalgError> {
    if !gamma.is_square() {
        return Err(LinalgError::NotSquare { rows: gamma.rows(), cols: gamma.cols() });
    }
    if g.len() != gamma.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: gamma.rows(),
            got: g.len(),
        });
    }
    let mut out = g.clone();
    out.axpy(C64::new(-shift, 0.0), &gamma.mul_vec(g));
    Ok(out)
}
