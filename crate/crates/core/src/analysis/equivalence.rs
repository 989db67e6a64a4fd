use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::airlink::{qpsk, SymbolResponse};
use crate::complexla::{ComplexMatrix, ComplexVector, C64};

/// Largest number of interfering symbols whose QPSK alphabet is enumerated exactly.
pub const MAX_ENUMERATED_SYMBOLS: usize = 8;

/// Exact second- and fourth-order statistics of one received block for
/// i.i.d. QPSK symbols and Gaussian noise with covariance `σ²I` and
/// pseudo-covariance `C = E[nnᵀ]`.
#[derive(Clone, Debug)]
pub struct BlockStatistics {
    responses: Vec<SymbolResponse>,
    sigma2: f64,
    pseudo: ComplexMatrix,
    dim: usize,
}

impl BlockStatistics {
    pub fn new(responses: Vec<SymbolResponse>, sigma2: f64, pseudo: ComplexMatrix) -> Result<Self, AnalysisError> {
        let dim = pseudo.rows();
        if responses.iter().any(|r| r.re.len() != dim || r.im.len() != dim) {
            return Err(AnalysisError::ShapeMismatch {
                left: (dim, dim),
                right: (responses.first().map_or(0, |r| r.re.len()), 1),
            });
        }
        if responses.len() > MAX_ENUMERATED_SYMBOLS {
            return Err(AnalysisError::TooManySymbols(responses.len()));
        }
        Ok(Self {
            responses,
            sigma2,
            pseudo,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_variance(&self) -> f64 {
        self.sigma2
    }

    /// Noise-free received vectors of every symbol combination (equally likely).
    fn signals(&self) -> impl Iterator<Item = ComplexVector> + '_ {
        let count = 1usize << (2 * self.responses.len());
        (0..count).map(move |mut idx| {
            let mut s = ComplexVector::zeros(self.dim);
            for r in &self.responses {
                let b = qpsk(idx & 1 == 1, idx & 2 == 2);
                idx >>= 2;
                s.axpy(C64::new(b.re, 0.0), &r.re);
                s.axpy(C64::new(b.im, 0.0), &r.im);
            }
            s
        })
    }

    fn combinations(&self) -> f64 {
        (1usize << (2 * self.responses.len())) as f64
    }

    /// `E[y yᴴ]`.
    pub fn covariance(&self) -> ComplexMatrix {
        let mut r = ComplexMatrix::identity(self.dim).scale_real(self.sigma2);
        let half = C64::new(0.5, 0.0);
        for resp in &self.responses {
            r.add_outer(half, &resp.re, &resp.re);
            r.add_outer(half, &resp.im, &resp.im);
        }
        r
    }

    /// `E[|wᴴy|² y yᴴ]`.
    pub fn cm_weighted_covariance(&self, w: &ComplexVector) -> ComplexMatrix {
        let s2 = self.sigma2;
        let wn = w.norm_sqr();
        let c = self.pseudo.mul_vec(&w.conj());
        let inv = 1.0 / self.combinations();
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        let mut cross = ComplexMatrix::zeros(self.dim, self.dim);
        let mut mean_a2 = 0.0;
        for s in self.signals() {
            let a = w.dot(&s);
            mean_a2 += a.norm_sqr() * inv;
            acc.add_outer(C64::new((a.norm_sqr() + s2 * wn) * inv, 0.0), &s, &s);
            // s xᴴ with x = σ²a·w + conj(a)·c; its Hermitian part is added below
            let mut x = w.scale(a * s2);
            x.axpy(a.conj(), &c);
            cross.add_outer(C64::new(inv, 0.0), &s, &x);
        }
        let mut out = &acc + &cross;
        out = &out + &cross.h();
        for i in 0..self.dim {
            out[(i, i)] += C64::new(mean_a2 * s2 + s2 * s2 * wn, 0.0);
        }
        out.add_outer(C64::new(s2 * s2, 0.0), w, w);
        out.add_outer(C64::new(1.0, 0.0), &c, &c);
        out.symmetrize();
        out
    }

    /// `E[conj(wᴴy) y]`.
    pub fn cross_correlation(&self, w: &ComplexVector) -> ComplexVector {
        let inv = 1.0 / self.combinations();
        let mut d = w.scale_real(self.sigma2);
        for s in self.signals() {
            let a = w.dot(&s);
            d.axpy(a.conj() * inv, &s);
        }
        d
    }

    /// `E[(|wᴴy|² − 1)²]`.
    pub fn cm_cost(&self, w: &ComplexVector) -> f64 {
        let v = self.sigma2 * w.norm_sqr();
        let rho = w.dot(&self.pseudo.mul_vec(&w.conj()));
        let inv = 1.0 / self.combinations();
        let mut total = 0.0;
        for s in self.signals() {
            let a = w.dot(&s);
            let a2 = a.norm_sqr();
            let fourth = a2 * a2 + 4.0 * a2 * v + 2.0 * v * v + rho.norm_sqr() + 2.0 * (a.conj() * a.conj() * rho).re;
            total += (fourth - 2.0 * (a2 + v) + 1.0) * inv;
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `β = A₁²(|wᴴp₁|² + σ²)`.
    pub beta: f64,
    /// `‖R_k − βR‖_F / ‖βR‖_F`.
    pub residual_rel: f64,
    pub snr_db: f64,
}

/// How closely the CM-weighted covariance `R_k` follows `βR`.
pub fn rk_equivalence(
    rk: &ComplexMatrix,
    r: &ComplexMatrix,
    w: &ComplexVector,
    p1: &ComplexVector,
    a1: f64,
    sigma2: f64,
) -> Result<EquivalenceReport, AnalysisError> {
    if rk.shape() != r.shape() {
        return Err(AnalysisError::ShapeMismatch {
            left: rk.shape(),
            right: r.shape(),
        });
    }
    if w.len() != r.rows() || p1.len() != r.rows() {
        return Err(AnalysisError::ShapeMismatch {
            left: r.shape(),
            right: (w.len(), p1.len()),
        });
    }
    let beta = a1 * a1 * (w.dot(p1).norm_sqr() + sigma2);
    Ok(equivalence_with_beta(rk, r, beta, 10.0 * (a1 * a1 / (2.0 * sigma2)).log10()))
}

/// Same comparison with a caller-chosen scale factor.
pub fn equivalence_with_beta(rk: &ComplexMatrix, r: &ComplexMatrix, beta: f64, snr_db: f64) -> EquivalenceReport {
    let scaled = r.scale_real(beta);
    let denom = scaled.frobenius_norm();
    let diff = (rk - &scaled).frobenius_norm();
    let residual_rel = if denom == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / denom
    };
    EquivalenceReport {
        beta,
        residual_rel,
        snr_db,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{
        exact_covariance, gen_spreading_set, noise_pseudo_covariance, random_qpsk, symbol_responses,
        synthesize_stream, ChannelModel, Frame, StbcLayout,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(sigma2: f64) -> (BlockStatistics, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let codes = gen_spreading_set(1, 4, 2, 31);
        let lp = 2;
        let ch = ChannelModel::draw(StbcLayout::Alamouti, 1, lp, &[0.0, -3.0], 0.0, &mut rng)
            .unwrap()
            .realization_at(0.0);
        let resp = symbol_responses(StbcLayout::Alamouti, &codes, lp, &ch, &[1.0], 0).unwrap();
        let stats = BlockStatistics::new(resp, sigma2, noise_pseudo_covariance(StbcLayout::Alamouti, 4, lp, sigma2)).unwrap();
        (stats, rng)
    }

    #[test]
    fn covariance_matches_exact_covariance() {
        let (stats, _) = setup(0.2);
        let direct = exact_covariance(&stats.responses, 0.2, stats.dim());
        assert!((&stats.covariance() - &direct).frobenius_norm() < 1e-12);
    }

    #[test]
    fn zero_filter_statistics() {
        let (stats, _) = setup(0.3);
        let rk = stats.cm_weighted_covariance(&ComplexVector::zeros(stats.dim()));
        assert!(rk.frobenius_norm() < 1e-15);
        assert!(stats.cross_correlation(&ComplexVector::zeros(stats.dim())).norm() < 1e-15);
        assert!((stats.cm_cost(&ComplexVector::zeros(stats.dim())) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments_match_monte_carlo() {
        let sigma2 = 0.25;
        let (stats, mut rng) = setup(sigma2);
        let codes = gen_spreading_set(1, 4, 2, 31);
        let lp = 2;
        let mut crng = ChaCha8Rng::seed_from_u64(31);
        let ch = ChannelModel::draw(StbcLayout::Alamouti, 1, lp, &[0.0, -3.0], 0.0, &mut crng)
            .unwrap()
            .realization_at(0.0);
        let blocks = 200_000;
        let channels = vec![ch; blocks];
        let amplitudes = vec![vec![1.0]; blocks];
        let symbols = vec![(0..2 * blocks).map(|_| random_qpsk(&mut rng)).collect::<Vec<_>>()];
        let frame = Frame {
            layout: StbcLayout::Alamouti,
            codes: &codes,
            lp,
            channels: &channels,
            amplitudes: &amplitudes,
            symbols: &symbols,
        };
        let out = synthesize_stream(&frame, sigma2, &mut rng).unwrap();
        let w: ComplexVector = (0..stats.dim()).map(|i| C64::new(0.3 / (1.0 + i as f64), 0.1 * i as f64 / 10.0)).collect();
        let mut rk = ComplexMatrix::zeros(stats.dim(), stats.dim());
        let mut d = ComplexVector::zeros(stats.dim());
        let mut cost = 0.0;
        // skip the edge blocks, which lack a neighbour
        let inner = &out[1..blocks - 1];
        let inv = 1.0 / inner.len() as f64;
        for b in inner {
            let y = &b.y[0];
            let z = w.dot(y);
            rk.add_outer(C64::new(z.norm_sqr() * inv, 0.0), y, y);
            d.axpy(z.conj() * inv, y);
            cost += (z.norm_sqr() - 1.0).powi(2) * inv;
        }
        let exact_rk = stats.cm_weighted_covariance(&w);
        assert!((&rk - &exact_rk).frobenius_norm() / exact_rk.frobenius_norm() < 0.02);
        let exact_d = stats.cross_correlation(&w);
        assert!((&d - &exact_d).norm() / exact_d.norm() < 0.02);
        assert!((cost - stats.cm_cost(&w)).abs() / stats.cm_cost(&w) < 0.02);
    }

    #[test]
    fn identity_comparison_has_zero_residual() {
        let r = ComplexMatrix::diag_real(&[1.0, 2.0, 3.0]);
        let rep = equivalence_with_beta(&r, &r, 1.0, 10.0);
        assert_eq!(rep.residual_rel, 0.0);
    }
}
