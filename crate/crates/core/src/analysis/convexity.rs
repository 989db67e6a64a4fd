use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::complexla::{hermitian_eigen, ComplexMatrix, ComplexVector, C64};

/// Sample constant-modulus cost `mean (|wᴴy|² − 1)²`.
pub fn cm_cost(w: &ComplexVector, ys: &[ComplexVector]) -> Result<f64, AnalysisError> {
    if ys.is_empty() {
        return Err(AnalysisError::Empty("sample set"));
    }
    let total: f64 = ys
        .iter()
        .map(|y| {
            let e = w.dot(y).norm_sqr() - 1.0;
            e * e
        })
        .sum();
    Ok(total / ys.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// `F = ν²A₁²|gᴴĝ|`.
    pub f: f64,
    /// `νA₁²|gᴴĝ| − 1/4`; the cost is convex when this is nonnegative.
    pub margin: f64,
    /// Smallest Hessian eigenvalue at the interference-free point `u′ = 0`.
    pub hessian_min_eig: f64,
    pub convex: bool,
}

/// Convexity condition of the constrained CM cost for unit-norm `g`, `ĝ`.
pub fn convexity_margin(nu: f64, a1: f64, g: &ComplexVector, ghat: &ComplexVector) -> Result<ConvexityReport, AnalysisError> {
    if g.len() != ghat.len() {
        return Err(AnalysisError::ShapeMismatch {
            left: (g.len(), 1),
            right: (ghat.len(), 1),
        });
    }
    let overlap = g.dot(ghat).norm();
    let f = nu * nu * a1 * a1 * overlap;
    let margin = nu * a1 * a1 * overlap - 0.25;
    let (_, hessian_min_eig) = hessian_cm(&ComplexVector::zeros(1), f)?;
    Ok(ConvexityReport {
        f,
        margin,
        hessian_min_eig,
        convex: margin >= 0.0,
    })
}

/// Hessian of the CM cost in the interferer coordinates `u′`:
/// `16(F − 1/4)I + 16(u′ᴴu′)I + 16u′u′ᴴ − 16 diag(|u′|²)`, and its smallest eigenvalue.
pub fn hessian_cm(uprime: &ComplexVector, f: f64) -> Result<(ComplexMatrix, f64), AnalysisError> {
    if uprime.is_empty() {
        return Err(AnalysisError::Empty("interference vector"));
    }
    let n = uprime.len();
    let energy = uprime.norm_sqr();
    let mut h = ComplexMatrix::identity(n).scale_real(16.0 * (f - 0.25) + 16.0 * energy);
    h.add_outer(C64::new(16.0, 0.0), uprime, uprime);
    for i in 0..n {
        h[(i, i)] -= C64::new(16.0 * uprime[i].norm_sqr(), 0.0);
    }
    h.symmetrize();
    let (values, _) = hermitian_eigen(&h)?;
    Ok((h, values[0]))
}
