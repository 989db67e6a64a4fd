use super::{ReceiverError, RlsParams};
use crate::airlink::UserSignature;
use crate::complexla::{rank_one_inverse_update, Cholesky, ComplexMatrix, ComplexVector, LinalgError, C64};

/// Exponentially weighted least-squares receiver driven by known symbols.
///
/// All symbol slots share one inverse covariance; each slot has its own filter.
#[derive(Clone, Debug)]
pub struct TrainedState {
    pinv: ComplexMatrix,
    filters: Vec<ComplexVector>,
    alpha: f64,
}

impl TrainedState {
    pub fn new(dim: usize, slots: usize, params: &RlsParams) -> Result<Self, ReceiverError> {
        params.validate()?;
        Ok(Self {
            pinv: ComplexMatrix::identity(dim).scale_real(1.0 / params.delta),
            filters: vec![ComplexVector::zeros(dim); slots],
            alpha: params.alpha,
        })
    }

    pub fn filters(&self) -> &[ComplexVector] {
        &self.filters
    }

    pub fn pinv(&self) -> &ComplexMatrix {
        &self.pinv
    }

    pub fn outputs(&self, y: &ComplexVector) -> Vec<C64> {
        self.filters.iter().map(|w| w.dot(y)).collect()
    }
}

/// One trained RLS step. Returns the a-priori outputs; without training
/// symbols the state is left untouched.
pub fn trained_rls_step(
    state: &mut TrainedState,
    y: &ComplexVector,
    training: Option<&[C64]>,
) -> Result<Vec<C64>, ReceiverError> {
    let dim = state.pinv.rows();
    if y.len() != dim {
        return Err(LinalgError::DimensionMismatch { expected: dim, got: y.len() }.into());
    }
    let z = state.outputs(y);
    let Some(b) = training else {
        return Ok(z);
    };
    if b.len() != state.filters.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: state.filters.len(),
            got: b.len(),
        }
        .into());
    }
    let alpha = state.alpha;
    let u = rank_one_inverse_update(&mut state.pinv, y, alpha, 1.0)?;
    let k = u.scale_real(1.0 / (alpha + y.dot(&u).re));
    for ((w, &bs), &zs) in state.filters.iter_mut().zip(b).zip(&z) {
        w.axpy((bs - zs).conj(), &k);
    }
    Ok(z)
}

/// Wiener filters `A₁R⁻¹𝒞g` and `A₁R⁻¹𝒞̄ conj(g)` for an exactly known covariance.
pub fn mmse_oracle(
    r: &ComplexMatrix,
    signature: &UserSignature,
    g: &ComplexVector,
    a1: f64,
) -> Result<Vec<ComplexVector>, ReceiverError> {
    let chol = Cholesky::new(r)?;
    let mut out = vec![chol.solve_vec(&signature.direct.mul_vec(g)).scale_real(a1)];
    if let Some(cbar) = &signature.conjugate {
        out.push(chol.solve_vec(&cbar.mul_vec(&g.conj())).scale_real(a1));
    }
    Ok(out)
}
