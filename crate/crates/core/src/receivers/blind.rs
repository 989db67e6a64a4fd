//! Code-constrained blind receivers: closed-form CCM and the CCM/CMV RLS
//! recursions.

use serde::{Deserialize, Serialize};

use super::{ReceiverError, RlsParams};
use crate::airlink::UserSignature;
use crate::complexla::{inverse_hermitian, rank_one_inverse_update, Cholesky, ComplexMatrix, ComplexVector, LinalgError, C64};

/// Relative constraint residual above which `Γ` and `Γ⁻¹` are rebuilt from `R⁻¹`.
pub const CONSTRAINT_REFRESH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlindCriterion {
    /// Constant modulus: the covariance is weighted by `|z|²` and `d` is tracked.
    Ccm,
    /// Minimum variance: plain covariance, no cross-correlation term.
    Cmv,
}

/// `w = R⁻¹[d − 𝒞(𝒞ᴴR⁻¹𝒞)⁻¹(𝒞ᴴR⁻¹d − ν g)]`.
pub fn ccm_closed_form(
    rinv: &ComplexMatrix,
    d: &ComplexVector,
    c: &ComplexMatrix,
    g: &ComplexVector,
    nu: f64,
) -> Result<ComplexVector, ReceiverError> {
    if rinv.rows() != c.rows() || d.len() != c.rows() || g.len() != c.cols() {
        return Err(LinalgError::DimensionMismatch {
            expected: c.rows(),
            got: d.len(),
        }
        .into());
    }
    let rc = rinv.matmul(c);
    let gamma = c.h_matmul(&rc);
    let chol = Cholesky::new(&gamma).map_err(|_| ReceiverError::SingularGamma)?;
    let rd = rinv.mul_vec(d);
    let mut rhs = c.h_mul_vec(&rd);
    rhs.axpy(C64::new(-nu, 0.0), g);
    let lambda = chol.solve_vec(&rhs);
    let mut w = rd;
    w.axpy(C64::new(-1.0, 0.0), &rc.mul_vec(&lambda));
    Ok(w)
}

/// Relative residual `‖𝒞ᴴw − t‖ / ‖t‖` of a linear constraint.
pub fn constraint_residual(c: &ComplexMatrix, w: &ComplexVector, target: &ComplexVector) -> f64 {
    let r = &c.h_mul_vec(w) - target;
    let t = target.norm();
    if t == 0.0 {
        r.norm()
    } else {
        r.norm() / t
    }
}

/// One constrained filter with its recursive statistics.
///
/// The same recursion serves the direct branch (`𝒞`, target `ν ĝ`) and the
/// conjugate branch (`𝒞̄`, target `ν conj(ĝ)`).
#[derive(Clone, Debug)]
pub struct ConstrainedBranch {
    constraint: ComplexMatrix,
    rinv: ComplexMatrix,
    gamma: ComplexMatrix,
    gamma_inv: ComplexMatrix,
    d: ComplexVector,
    w: ComplexVector,
    refreshes: usize,
}

impl ConstrainedBranch {
    /// Starts from `R⁻¹ = δ⁻¹I`, `d = 0` and the minimum-norm filter meeting the constraint.
    pub fn new(constraint: ComplexMatrix, target: &ComplexVector, delta: f64) -> Result<Self, ReceiverError> {
        if !(delta > 0.0) {
            return Err(LinalgError::InvalidArgument(format!("regularization δ = {delta} must be > 0")).into());
        }
        if target.len() != constraint.cols() {
            return Err(LinalgError::DimensionMismatch {
                expected: constraint.cols(),
                got: target.len(),
            }
            .into());
        }
        let dim = constraint.rows();
        let rinv = ComplexMatrix::identity(dim).scale_real(1.0 / delta);
        let mut branch = Self {
            gamma: ComplexMatrix::zeros(0, 0),
            gamma_inv: ComplexMatrix::zeros(0, 0),
            d: ComplexVector::zeros(dim),
            w: ComplexVector::zeros(dim),
            rinv,
            constraint,
            refreshes: 0,
        };
        branch.rebuild_gamma()?;
        branch.refresh(target)?;
        Ok(branch)
    }

    pub fn constraint(&self) -> &ComplexMatrix {
        &self.constraint
    }

    pub fn filter(&self) -> &ComplexVector {
        &self.w
    }

    pub fn rinv(&self) -> &ComplexMatrix {
        &self.rinv
    }

    /// `Γ = 𝒞ᴴR⁻¹𝒞`.
    pub fn gamma(&self) -> &ComplexMatrix {
        &self.gamma
    }

    pub fn gamma_inv(&self) -> &ComplexMatrix {
        &self.gamma_inv
    }

    pub fn cross_correlation(&self) -> &ComplexVector {
        &self.d
    }

    /// Number of times `Γ⁻¹` had to be rebuilt to hold the constraint.
    pub fn refreshes(&self) -> usize {
        self.refreshes
    }

    /// Filter output `wᴴy`.
    pub fn output(&self, y: &ComplexVector) -> C64 {
        self.w.dot(y)
    }

    fn rebuild_gamma(&mut self) -> Result<(), ReceiverError> {
        self.rinv.symmetrize();
        let mut gamma = self.constraint.h_matmul(&self.rinv.matmul(&self.constraint));
        gamma.symmetrize();
        self.gamma_inv = inverse_hermitian(&gamma).map_err(|_| ReceiverError::SingularGamma)?;
        self.gamma = gamma;
        Ok(())
    }

    /// Folds `y` into `R⁻¹`, `Γ`, `Γ⁻¹` and `d`; returns the a-priori output.
    pub fn absorb(&mut self, criterion: BlindCriterion, y: &ComplexVector, alpha: f64) -> Result<C64, ReceiverError> {
        if y.len() != self.w.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.w.len(),
                got: y.len(),
            }
            .into());
        }
        let z = self.output(y);
        let weight = match criterion {
            BlindCriterion::Ccm => z.norm_sqr(),
            BlindCriterion::Cmv => 1.0,
        };
        let gain = (1.0 - alpha) * weight;
        // R⁻¹ ← (αR + gain·yyᴴ)⁻¹ = (P − κuuᴴ)/α with u = Py
        let u = rank_one_inverse_update(&mut self.rinv, y, alpha, gain)?;
        let rel = gain / alpha;
        let kappa = rel / (1.0 + rel * y.dot(&u).re);
        // Γ ← (Γ − κvvᴴ)/α with v = 𝒞ᴴu, and Γ⁻¹ follows by a second rank-one update
        let v = self.constraint.h_mul_vec(&u);
        self.gamma.add_outer(C64::new(-kappa, 0.0), &v, &v);
        self.gamma = self.gamma.scale_real(1.0 / alpha);
        if rank_one_inverse_update(&mut self.gamma_inv, &v, 1.0 / alpha, -kappa / alpha).is_err() {
            self.rebuild_gamma()?;
        }
        if criterion == BlindCriterion::Ccm {
            for (di, &yi) in self.d.as_mut_slice().iter_mut().zip(y.iter()) {
                *di = *di * alpha + z.conj() * yi * (1.0 - alpha);
            }
        }
        Ok(z)
    }

    /// Recomputes `w` for the constraint target `t`, rebuilding `Γ⁻¹` when
    /// the propagated inverse no longer meets the constraint tightly.
    pub fn refresh(&mut self, target: &ComplexVector) -> Result<(), ReceiverError> {
        self.w = self.filter_for(target);
        if constraint_residual(&self.constraint, &self.w, target) > CONSTRAINT_REFRESH_TOL {
            self.rebuild_gamma()?;
            self.refreshes += 1;
            self.w = self.filter_for(target);
        }
        Ok(())
    }

    fn filter_for(&self, target: &ComplexVector) -> ComplexVector {
        let rd = self.rinv.mul_vec(&self.d);
        let mut rhs = self.constraint.h_mul_vec(&rd);
        rhs.axpy(C64::new(-1.0, 0.0), target);
        let lambda = self.gamma_inv.mul_vec(&rhs);
        let mut inner = self.d.clone();
        inner.axpy(C64::new(-1.0, 0.0), &self.constraint.mul_vec(&lambda));
        self.rinv.mul_vec(&inner)
    }
}

/// Blind receiver of one user at one receive antenna.
#[derive(Clone, Debug)]
pub struct ReceiverState {
    criterion: BlindCriterion,
    params: RlsParams,
    direct: ConstrainedBranch,
    conjugate: Option<ConstrainedBranch>,
}

impl ReceiverState {
    pub fn new(
        criterion: BlindCriterion,
        signature: &UserSignature,
        ghat: &ComplexVector,
        params: RlsParams,
    ) -> Result<Self, ReceiverError> {
        params.validate()?;
        let direct = ConstrainedBranch::new(signature.direct.clone(), &ghat.scale_real(params.nu), params.delta)?;
        let conjugate = match &signature.conjugate {
            Some(cbar) => Some(ConstrainedBranch::new(
                cbar.clone(),
                &ghat.conj().scale_real(params.nu),
                params.delta,
            )?),
            None => None,
        };
        Ok(Self {
            criterion,
            params,
            direct,
            conjugate,
        })
    }

    pub fn criterion(&self) -> BlindCriterion {
        self.criterion
    }

    pub fn params(&self) -> &RlsParams {
        &self.params
    }

    pub fn direct(&self) -> &ConstrainedBranch {
        &self.direct
    }

    pub fn conjugate(&self) -> Option<&ConstrainedBranch> {
        self.conjugate.as_ref()
    }

    /// Soft outputs of the current filters, one per symbol of the block.
    pub fn outputs(&self, y: &ComplexVector) -> Vec<C64> {
        let mut z = vec![self.direct.output(y)];
        if let Some(c) = &self.conjugate {
            z.push(c.output(y));
        }
        z
    }

    /// Updates the statistics with `y` and returns the a-priori soft outputs.
    pub fn absorb(&mut self, y: &ComplexVector) -> Result<Vec<C64>, ReceiverError> {
        let alpha = self.params.alpha;
        let mut z = vec![self.direct.absorb(self.criterion, y, alpha)?];
        if let Some(c) = &mut self.conjugate {
            z.push(c.absorb(self.criterion, y, alpha)?);
        }
        Ok(z)
    }

    /// Recomputes the filters for the channel estimate `ĝ`.
    pub fn refresh(&mut self, ghat: &ComplexVector) -> Result<(), ReceiverError> {
        let nu = self.params.nu;
        self.direct.refresh(&ghat.scale_real(nu))?;
        if let Some(c) = &mut self.conjugate {
            c.refresh(&ghat.conj().scale_real(nu))?;
        }
        Ok(())
    }

    /// Largest relative constraint residual over the branches for `ĝ`.
    pub fn constraint_residual(&self, ghat: &ComplexVector) -> f64 {
        let nu = self.params.nu;
        let mut r = constraint_residual(&self.direct.constraint, &self.direct.w, &ghat.scale_real(nu));
        if let Some(c) = &self.conjugate {
            r = r.max(constraint_residual(&c.constraint, &c.w, &ghat.conj().scale_real(nu)));
        }
        r
    }
}

fn blind_step(
    state: &mut ReceiverState,
    expected: BlindCriterion,
    y: &ComplexVector,
    ghat: &ComplexVector,
) -> Result<Vec<C64>, ReceiverError> {
    if state.criterion != expected {
        return Err(ReceiverError::ModeMismatch);
    }
    let z = state.absorb(y)?;
    state.refresh(ghat)?;
    Ok(z)
}

/// One CCM-RLS step with the channel estimate `ĝ`; returns a-priori outputs.
pub fn ccm_rls_step(state: &mut ReceiverState, y: &ComplexVector, ghat: &ComplexVector) -> Result<Vec<C64>, ReceiverError> {
    blind_step(state, BlindCriterion::Ccm, y, ghat)
}

/// One CMV-RLS step with the channel estimate `ĝ`; returns a-priori outputs.
pub fn cmv_rls_step(state: &mut ReceiverState, y: &ComplexVector, ghat: &ComplexVector) -> Result<Vec<C64>, ReceiverError> {
    blind_step(state, BlindCriterion::Cmv, y, ghat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{gen_spreading_set, user_signature, StbcLayout};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
        (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn closed_form_with_zero_d_is_min_norm() {
        let codes = gen_spreading_set(1, 8, 2, 3);
        let sig = user_signature(StbcLayout::Alamouti, &codes, 0, 3);
        let c = &sig.direct;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_vector(6, &mut rng);
        let dim = c.rows();
        let w = ccm_closed_form(&ComplexMatrix::identity(dim), &ComplexVector::zeros(dim), c, &g, 1.0).unwrap();
        let gram = c.h_matmul(c);
        let expected = c.mul_vec(&inverse_hermitian(&gram).unwrap().mul_vec(&g));
        assert!((&w - &expected).norm() < 1e-10);
    }

    #[test]
    fn closed_form_meets_constraint() {
        let codes = gen_spreading_set(1, 8, 2, 4);
        let sig = user_signature(StbcLayout::Alamouti, &codes, 0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dim = sig.direct.rows();
        let mut r = ComplexMatrix::identity(dim);
        for _ in 0..3 * dim {
            let x = random_vector(dim, &mut rng);
            r.add_outer(C64::new(1.0, 0.0), &x, &x);
        }
        let rinv = inverse_hermitian(&r).unwrap();
        let d = random_vector(dim, &mut rng);
        let g = random_vector(4, &mut rng);
        let w = ccm_closed_form(&rinv, &d, &sig.direct, &g, 0.7).unwrap();
        assert!(constraint_residual(&sig.direct, &w, &g.scale_real(0.7)) < 1e-8);
    }

    #[test]
    fn rank_deficient_constraint_is_singular() {
        let mut c = ComplexMatrix::zeros(4, 2);
        c[(0, 0)] = C64::new(1.0, 0.0);
        c[(0, 1)] = C64::new(1.0, 0.0);
        let err = ccm_closed_form(
            &ComplexMatrix::identity(4),
            &ComplexVector::zeros(4),
            &c,
            &ComplexVector::zeros(2),
            1.0,
        );
        assert!(matches!(err, Err(ReceiverError::SingularGamma)));
    }

    #[test]
    fn zero_input_decays_d_and_keeps_constraint() {
        let codes = gen_spreading_set(2, 8, 2, 5);
        let sig = user_signature(StbcLayout::Alamouti, &codes, 0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_vector(4, &mut rng).normalized().unwrap();
        let params = RlsParams::default();
        let mut state = ReceiverState::new(BlindCriterion::Ccm, &sig, &g, params).unwrap();
        for _ in 0..20 {
            let y = random_vector(sig.direct.rows(), &mut rng);
            ccm_rls_step(&mut state, &y, &g).unwrap();
        }
        let before = state.direct().cross_correlation().clone();
        ccm_rls_step(&mut state, &ComplexVector::zeros(before.len()), &g).unwrap();
        let after = state.direct().cross_correlation();
        assert!((after - &before.scale_real(params.alpha)).norm() < 1e-14);
        assert!(state.constraint_residual(&g) < 1e-6);
    }

    #[test]
    fn cmv_on_white_noise_tends_to_min_norm_filter() {
        let codes = gen_spreading_set(1, 6, 1, 5);
        let sig = user_signature(StbcLayout::Single, &codes, 0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_vector(2, &mut rng).normalized().unwrap();
        let params = RlsParams {
            alpha: 0.999,
            ..RlsParams::default()
        };
        let mut state = ReceiverState::new(BlindCriterion::Cmv, &sig, &g, params).unwrap();
        let normal = rand_distr::Normal::new(0.0, 0.5f64.sqrt()).unwrap();
        use rand_distr::Distribution;
        for _ in 0..20_000 {
            let y: ComplexVector = (0..sig.direct.rows())
                .map(|_| C64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect();
            cmv_rls_step(&mut state, &y, &g).unwrap();
        }
        let c = &sig.direct;
        let expected = c.mul_vec(&inverse_hermitian(&c.h_matmul(c)).unwrap().mul_vec(&g));
        let w = state.direct().filter();
        assert!((w - &expected).norm() / expected.norm() < 0.1);
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let codes = gen_spreading_set(1, 6, 1, 5);
        let sig = user_signature(StbcLayout::Single, &codes, 0, 1);
        let g = ComplexVector::unit(1, 0);
        let mut state = ReceiverState::new(BlindCriterion::Cmv, &sig, &g, RlsParams::default()).unwrap();
        let y = ComplexVector::zeros(6);
        assert!(matches!(ccm_rls_step(&mut state, &y, &g), Err(ReceiverError::ModeMismatch)));
    }
}
