use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::complexla::{singular_values, ComplexMatrix};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_REL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub n: usize,
    pub nt: usize,
    pub lp: usize,
    /// Largest signal-subspace rank leaving room for a unique channel.
    pub qs_max: usize,
    /// Largest user load.
    pub k_max: usize,
}

impl CapacityReport {
    pub fn admits(&self, users: usize) -> bool {
        users <= self.k_max
    }
}

/// Load bound `K ≤ N_t[N − (N_t−1)/N_t − 2 min{N/3 − (N_t−1)/(3N_t), L_p − 1}]`.
///
/// Multiplying the bracket by `3N_t` makes every term an integer, so the
/// floor is taken on an exact fraction with denominator 3.
pub fn capacity_bound(n: usize, nt: usize, lp: usize) -> Result<CapacityReport, AnalysisError> {
    if n == 0 || lp == 0 || !(1..=2).contains(&nt) {
        return Err(AnalysisError::InvalidInput(format!(
            "capacity needs N ≥ 1, N_t ∈ {{1, 2}}, L_p ≥ 1 (got N={n}, N_t={nt}, L_p={lp})"
        )));
    }
    let (n_i, nt_i, lp_i) = (n as i64, nt as i64, lp as i64);
    let third_term = (nt_i * n_i - (nt_i - 1)).min(3 * nt_i * (lp_i - 1));
    let numerator = 3 * nt_i * n_i - 3 * (nt_i - 1) - 2 * third_term;
    let k_max = numerator.div_euclid(3).max(0) as usize;
    let m = n + lp - 1;
    Ok(CapacityReport {
        n,
        nt,
        lp,
        qs_max: nt * m - nt * lp + 1,
        k_max,
    })
}

/// Numerical rank with the relative tolerance, and whether any singular
/// value lies within a decade of the threshold.
pub fn numerical_rank(a: &ComplexMatrix) -> Result<(usize, bool), AnalysisError> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok((0, false));
    }
    let sv = singular_values(a)?;
    let top = sv[0];
    if top == 0.0 {
        return Ok((0, false));
    }
    let tol = RANK_REL_TOL * top;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let ambiguous = sv.iter().any(|&s| s > 0.1 * tol && s < 10.0 * tol);
    Ok((rank, ambiguous))
}

/// `dim(range(A) ∩ range(B)) = rank A + rank B − rank [A B]`.
pub fn intersection_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<(usize, bool), AnalysisError> {
    if a.rows() != b.rows() {
        return Err(AnalysisError::ShapeMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (ra, wa) = numerical_rank(a)?;
    let (rb, wb) = numerical_rank(b)?;
    let (rab, wab) = numerical_rank(&a.hstack(b))?;
    Ok(((ra + rb).saturating_sub(rab), wa || wb || wab))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub identifiable: bool,
    pub intersection_dim: usize,
    pub intersection_dim_bar: Option<usize>,
    /// Some singular value sat within a decade of the rank threshold, so
    /// the verdict depends on the tolerance.
    pub rank_tol_warning: bool,
}

/// Checks that the constraint ranges meet the signal ranges in exactly one
/// direction (the user's own signature), which makes the channel unique up
/// to a phase.
pub fn identifiability_check(
    cstk: &ComplexMatrix,
    x_basis: &ComplexMatrix,
    conjugate: Option<(&ComplexMatrix, &ComplexMatrix)>,
) -> Result<IdentifiabilityReport, AnalysisError> {
    let (dim, mut warn) = intersection_dim(cstk, x_basis)?;
    let mut identifiable = dim == 1;
    let mut dim_bar = None;
    if let Some((cbar, xbar)) = conjugate {
        let (d, w) = intersection_dim(cbar, xbar)?;
        warn |= w;
        identifiable &= d == 1;
        dim_bar = Some(d);
    }
    Ok(IdentifiabilityReport {
        identifiable,
        intersection_dim: dim,
        intersection_dim_bar: dim_bar,
        rank_tol_warning: warn,
    })
}
