//! Space-time linear receivers: blind CCM and CMV recursions, trained RLS,
//! the MMSE reference, symbol detection and receive-antenna combining.

mod blind;
mod trained;

pub use blind::{
    ccm_closed_form, ccm_rls_step, cmv_rls_step, constraint_residual, BlindCriterion, ConstrainedBranch,
    ReceiverState, CONSTRAINT_REFRESH_TOL,
};
pub use trained::{mmse_oracle, trained_rls_step, TrainedState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexla::{LinalgError, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReceiverError {
    #[error("constraint Gram matrix 𝒞ᴴR⁻¹𝒞 is singular")]
    SingularGamma,
    #[error("receiver state was built for a different criterion")]
    ModeMismatch,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Constants shared by the RLS recursions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlsParams {
    /// Constraint scale `ν`.
    pub nu: f64,
    /// Forgetting factor `α`.
    pub alpha: f64,
    /// Initial regularization: `R⁻¹(0) = δ⁻¹I`.
    pub delta: f64,
}

impl Default for RlsParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            alpha: 0.998,
            delta: 0.01,
        }
    }
}

impl RlsParams {
    pub fn validate(&self) -> Result<(), LinalgError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LinalgError::InvalidArgument(format!("forgetting factor {} outside (0, 1]", self.alpha)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(LinalgError::InvalidArgument(format!("regularization {} must be > 0", self.delta)));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(LinalgError::InvalidArgument(format!("constraint scale {} must be > 0", self.nu)));
        }
        Ok(())
    }
}

/// Hard QPSK decision `sign(Re z) + j·sign(Im z)` with `sign(0) = +1`.
pub fn detect(z: C64) -> C64 {
    let s = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
    C64::new(s(z.re), s(z.im))
}

/// Bit errors (0, 1 or 2) of the decision on `z` against the sent symbol `b`.
pub fn bit_errors(z: C64, b: C64) -> u32 {
    let d = detect(z);
    let t = detect(b);
    u32::from(d.re != t.re) + u32::from(d.im != t.im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerMode {
    Egc,
    Mrc,
}

/// Real combining gains indexed `[antenna][slot]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinerConfig {
    pub mode: CombinerMode,
    pub gains: Vec<Vec<f64>>,
}

impl CombinerConfig {
    pub fn egc(antennas: usize, slots: usize) -> Self {
        Self {
            mode: CombinerMode::Egc,
            gains: vec![vec![1.0; slots]; antennas],
        }
    }

    /// Gains proportional to per-antenna amplitude estimates `[antenna][slot]`,
    /// scaled so that `Σ_m α_m² = N_r` for every slot.
    pub fn mrc(amplitudes: &[Vec<f64>]) -> Self {
        let nr = amplitudes.len();
        let slots = amplitudes.first().map_or(0, |a| a.len());
        let mut gains = vec![vec![1.0; slots]; nr];
        for s in 0..slots {
            let energy: f64 = amplitudes.iter().map(|a| a[s] * a[s]).sum();
            if energy > 0.0 {
                let scale = (nr as f64 / energy).sqrt();
                for m in 0..nr {
                    gains[m][s] = amplitudes[m][s].max(0.0) * scale;
                }
            }
        }
        Self {
            mode: CombinerMode::Mrc,
            gains,
        }
    }
}

/// `z = Σ_m diag(α_m) z_m`.
pub fn combine(z_per_antenna: &[Vec<C64>], cfg: &CombinerConfig) -> Vec<C64> {
    let slots = z_per_antenna.first().map_or(0, |z| z.len());
    let mut out = vec![C64::new(0.0, 0.0); slots];
    for (z, g) in z_per_antenna.iter().zip(&cfg.gains) {
        for s in 0..slots {
            out[s] += z[s] * g[s];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detect_quadrants_and_ties() {
        assert_eq!(detect(C64::new(0.3, -0.2)), C64::new(1.0, -1.0));
        assert_eq!(detect(C64::new(0.0, 0.0)), C64::new(1.0, 1.0));
        assert_eq!(detect(C64::new(-2.0, 0.0)), C64::new(-1.0, 1.0));
    }

    #[test]
    fn bit_error_count() {
        let b = C64::new(0.7, -0.7);
        assert_eq!(bit_errors(b, b), 0);
        assert_eq!(bit_errors(-b, b), 2);
        assert_eq!(bit_errors(b.conj(), b), 1);
    }

    #[test]
    fn single_branch_egc_passes_through() {
        let z = vec![vec![C64::new(0.2, -1.0), C64::new(3.0, 0.5)]];
        assert_eq!(combine(&z, &CombinerConfig::egc(1, 2)), z[0]);
    }

    #[test]
    fn egc_of_equal_branches_doubles() {
        let a = vec![C64::new(0.2, -1.0), C64::new(3.0, 0.5)];
        let out = combine(&[a.clone(), a.clone()], &CombinerConfig::egc(2, 2));
        assert_eq!(out, vec![a[0] * 2.0, a[1] * 2.0]);
    }

    #[test]
    fn mrc_with_dead_branch_keeps_live_one() {
        let cfg = CombinerConfig::mrc(&[vec![0.8, 0.8], vec![0.0, 0.0]]);
        assert_eq!(cfg.gains[1], vec![0.0, 0.0]);
        let s2 = 2f64.sqrt();
        assert!((cfg.gains[0][0] - s2).abs() < 1e-15);
        let z = vec![vec![C64::new(1.0, 1.0), C64::new(-1.0, 0.5)], vec![C64::new(9.0, 9.0), C64::new(9.0, 9.0)]];
        let out = combine(&z, &cfg);
        assert!((out[0] - z[0][0] * s2).norm() < 1e-14);
        assert!((out[1] - z[0][1] * s2).norm() < 1e-14);
    }

    #[test]
    fn mrc_gains_normalized() {
        let cfg = CombinerConfig::mrc(&[vec![1.0], vec![3.0]]);
        let e: f64 = cfg.gains.iter().map(|g| g[0] * g[0]).sum();
        assert!((e - 2.0).abs() < 1e-12);
        assert!(cfg.gains[1][0] > cfg.gains[0][0]);
    }
}
