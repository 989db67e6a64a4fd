//! Blind space-time channel estimation from the noise subspace of the
//! received covariance.

use thiserror::Error;

use crate::complexla::{
    canonical_phase, deflate_power_step, hermitian_eigen, inverse_hermitian, matrix_power, ComplexMatrix,
    ComplexVector, LinalgError, C64,
};

/// Spectral gap (relative to the largest eigenvalue) below which the
/// minimizer of the subspace objective is reported as not unique.
pub const DEGENERACY_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChestError {
    #[error("trace of the tracking matrix is {0:e}; nothing to track")]
    ZeroTrace(f64),
    #[error("channel estimate collapsed to the zero vector")]
    Collapsed,
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `(R/σ²)^{−p}`, which tends to the noise-subspace projector as `p` grows.
pub fn noise_subspace_power(r: &ComplexMatrix, sigma2: f64, p: u32) -> Result<ComplexMatrix, ChestError> {
    if !(sigma2 > 0.0) {
        return Err(ChestError::NonPositiveNoise(sigma2));
    }
    let scaled_inv = inverse_hermitian(&r.scale_real(1.0 / sigma2))?;
    let mut out = matrix_power(&scaled_inv, p);
    out.symmetrize();
    Ok(out)
}

/// Noise variance guess: mean of the smallest quarter of the eigenvalues of `r`.
pub fn estimate_noise_variance(r: &ComplexMatrix) -> Result<f64, ChestError> {
    let (values, _) = hermitian_eigen(r)?;
    let count = (values.len() / 4).max(1);
    Ok(values[..count].iter().sum::<f64>() / count as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceEstimate {
    /// Unit-norm channel estimate with the largest entry real positive.
    pub ghat: ComplexVector,
    /// Minimum value of the objective.
    pub objective: f64,
    /// The two smallest eigenvalues coincide, so any vector of their span is optimal.
    pub degenerate_spectrum: bool,
}

/// Channel estimate minimizing `gᴴ𝒞ᴴ(R/σ²)^{−p}𝒞g` over unit-norm `g`.
pub fn subspace_channel_svd(
    r: &ComplexMatrix,
    c: &ComplexMatrix,
    p: u32,
    sigma2: f64,
) -> Result<SubspaceEstimate, ChestError> {
    let proj = noise_subspace_power(r, sigma2, p)?;
    let mut objective = c.h_matmul(&proj.matmul(c));
    objective.symmetrize();
    let (values, vectors) = hermitian_eigen(&objective)?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate_spectrum = values.len() > 1 && values[1] - values[0] <= DEGENERACY_GAP * scale.max(f64::MIN_POSITIVE);
    Ok(SubspaceEstimate {
        ghat: canonical_phase(&vectors.column(0)),
        objective: values[0],
        degenerate_spectrum,
    })
}

/// Power-method channel tracker of one user at one receive antenna.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEstimatorState {
    ghat: ComplexVector,
    reference: Option<ComplexVector>,
    steps: usize,
}

impl ChannelEstimatorState {
    /// Starts from the first canonical vector.
    pub fn new(dim: usize) -> Self {
        Self::from_estimate(ComplexVector::unit(dim, 0))
    }

    pub fn from_estimate(ghat: ComplexVector) -> Self {
        let ghat = ghat.normalized().expect("initial channel estimate must be nonzero");
        Self {
            ghat,
            reference: None,
            steps: 0,
        }
    }

    pub fn ghat(&self) -> &ComplexVector {
        &self.ghat
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn reference(&self) -> Option<&ComplexVector> {
        self.reference.as_ref()
    }

    /// Sets the phase reference direction and rotates the current estimate onto it.
    pub fn set_reference(&mut self, reference: ComplexVector) {
        self.ghat = remove_phase_ambiguity(&self.ghat, &reference);
        self.reference = Some(reference);
    }
}

/// One tracker step `ĝ ← (I − ϑ(Γ + conj Γ̄))ĝ`, `ϑ = 1/tr(Γ + Γ̄)`, then normalization.
///
/// `gamma_bar` belongs to the conjugate branch, whose constraint targets
/// `conj(g)`, so it enters the quadratic form in `g` conjugated. Without it
/// this is the single-branch iteration with `γ = 1/tr Γ`.
pub fn channel_rls_step(
    state: &mut ChannelEstimatorState,
    gamma: &ComplexMatrix,
    gamma_bar: Option<&ComplexMatrix>,
) -> Result<(), ChestError> {
    let combined = match gamma_bar {
        Some(gb) => gamma + &gb.conj(),
        None => gamma.clone(),
    };
    let trace = combined.trace().re;
    if !(trace > 1e-14) {
        return Err(ChestError::ZeroTrace(trace));
    }
    let next = deflate_power_step(&state.ghat, &combined, 1.0 / trace)?;
    let next = next.normalized().ok_or(ChestError::Collapsed)?;
    state.ghat = match &state.reference {
        Some(r) => remove_phase_ambiguity(&next, r),
        None => next,
    };
    state.steps += 1;
    Ok(())
}

/// Rotates `ghat` so that `⟨reference, ĝ⟩` is real and nonnegative.
pub fn remove_phase_ambiguity(ghat: &ComplexVector, reference: &ComplexVector) -> ComplexVector {
    let ip = reference.dot(ghat);
    let mag = ip.norm();
    if mag == 0.0 {
        return ghat.clone();
    }
    ghat.scale(C64::new(ip.re / mag, -ip.im / mag))
}

/// Phase-invariant squared error `min_φ ‖ĝe^{−jφ} − g‖²`.
pub fn channel_mse(ghat: &ComplexVector, g: &ComplexVector) -> f64 {
    (g.norm_sqr() + ghat.norm_sqr() - 2.0 * ghat.dot(g).norm()).max(0.0)
}
