use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AirlinkError;
use crate::complexla::{ComplexMatrix, C64};

/// Random ±1/√N spreading codes, one per (user, transmit antenna).
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadingSet {
    users: usize,
    chips: usize,
    tx: usize,
    codes: Vec<Vec<f64>>,
}

impl SpreadingSet {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn chips(&self) -> usize {
        self.chips
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    /// Code of `user` on transmit antenna `antenna` (both zero-based).
    pub fn code(&self, user: usize, antenna: usize) -> &[f64] {
        &self.codes[user * self.tx + antenna]
    }

    /// Builds a set from explicit chip vectors, indexed `[user][antenna]`.
    pub fn from_codes(codes: Vec<Vec<Vec<f64>>>) -> Result<Self, AirlinkError> {
        let users = codes.len();
        let tx = codes.first().map_or(0, |c| c.len());
        let chips = codes.first().and_then(|c| c.first()).map_or(0, |c| c.len());
        if users == 0 || tx == 0 || chips == 0 {
            return Err(AirlinkError::Config("empty spreading set".into()));
        }
        if codes.iter().any(|u| u.len() != tx || u.iter().any(|c| c.len() != chips)) {
            return Err(AirlinkError::Config("ragged spreading set".into()));
        }
        Ok(Self {
            users,
            chips,
            tx,
            codes: codes.into_iter().flatten().collect(),
        })
    }
}

/// Deterministic random codes for `users` users and `tx` transmit antennas.
///
/// Entries are ±1/√N. Duplicate codes are redrawn while the code space allows it.
pub fn gen_spreading_set(users: usize, chips: usize, tx: usize, seed: u64) -> SpreadingSet {
    assert!(users >= 1 && chips >= 2 && tx >= 1, "need K ≥ 1, N ≥ 2, Nt ≥ 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = 1.0 / (chips as f64).sqrt();
    let total = users * tx;
    let distinct_possible = chips >= 64 || total <= (1usize << chips);
    let mut codes: Vec<Vec<f64>> = Vec::with_capacity(total);
    while codes.len() < total {
        let mut attempts = 0;
        loop {
            let code: Vec<f64> = (0..chips)
                .map(|_| if rng.random::<bool>() { amp } else { -amp })
                .collect();
            attempts += 1;
            if !distinct_possible || attempts > 1000 || !codes.contains(&code) {
                codes.push(code);
                break;
            }
        }
    }
    SpreadingSet { users, chips, tx, codes }
}

/// `M × L_p` convolution matrix whose column `j` is `code` delayed by `j` chips.
pub fn build_convolution_matrix(code: &[f64], lp: usize) -> ComplexMatrix {
    assert!(lp >= 1, "channel order must be at least 1");
    let m = code.len() + lp - 1;
    let mut c = ComplexMatrix::zeros(m, lp);
    for j in 0..lp {
        for (n, &a) in code.iter().enumerate() {
            c[(n + j, j)] = C64::new(a, 0.0);
        }
    }
    c
}

/// Space-time constraint matrices of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMatrices {
    pub c1: ComplexMatrix,
    pub c2: ComplexMatrix,
    /// `[[C1, 0], [0, C2]]`
    pub cstk: ComplexMatrix,
    /// `[[0, C2], [−C1, 0]]`
    pub cbar: ComplexMatrix,
}

pub fn build_constraint_matrices(
    c1: &ComplexMatrix,
    c2: &ComplexMatrix,
) -> Result<ConstraintMatrices, AirlinkError> {
    if c1.shape() != c2.shape() {
        return Err(AirlinkError::ShapeMismatch {
            left: c1.shape(),
            right: c2.shape(),
        });
    }
    let (m, lp) = c1.shape();
    let mut cstk = ComplexMatrix::zeros(2 * m, 2 * lp);
    cstk.set_block(0, 0, c1);
    cstk.set_block(m, lp, c2);
    let mut cbar = ComplexMatrix::zeros(2 * m, 2 * lp);
    cbar.set_block(0, lp, c2);
    cbar.set_block(m, 0, &c1.scale(C64::new(-1.0, 0.0)));
    Ok(ConstraintMatrices {
        c1: c1.clone(),
        c2: c2.clone(),
        cstk,
        cbar,
    })
}

/// Constraint matrices of `user` for the codes in `set` (requires two antennas).
pub fn user_constraints(set: &SpreadingSet, user: usize, lp: usize) -> ConstraintMatrices {
    assert_eq!(set.tx_antennas(), 2, "space-time constraints need two transmit antennas");
    let c1 = build_convolution_matrix(set.code(user, 0), lp);
    let c2 = build_convolution_matrix(set.code(user, 1), lp);
    build_constraint_matrices(&c1, &c2).expect("codes of one set share a length")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_codes_have_unit_norm() {
        let set = gen_spreading_set(1, 4, 2, 0);
        for a in 0..2 {
            let code = set.code(0, a);
            assert!(code.iter().all(|&c| (c.abs() - 0.5).abs() < 1e-15));
            let norm: f64 = code.iter().map(|c| c * c).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert_ne!(set.code(0, 0), set.code(0, 1));
    }

    #[test]
    fn same_seed_same_set() {
        assert_eq!(gen_spreading_set(4, 16, 2, 9), gen_spreading_set(4, 16, 2, 9));
        assert_ne!(gen_spreading_set(4, 16, 2, 9), gen_spreading_set(4, 16, 2, 10));
    }

    #[test]
    fn pairwise_cross_correlation_below_one() {
        let set = gen_spreading_set(10, 32, 2, 3);
        let all: Vec<&[f64]> = (0..10).flat_map(|k| (0..2).map(move |a| (k, a))).map(|(k, a)| set.code(k, a)).collect();
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                let rho: f64 = all[i].iter().zip(all[j]).map(|(a, b)| a * b).sum();
                assert!(rho.abs() < 1.0 - 1e-12, "codes {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn scalar_convolution_matrix() {
        let c = build_convolution_matrix(&[1.0], 1);
        assert_eq!(c, ComplexMatrix::from_real_rows(&[&[1.0]]));
    }

    #[test]
    fn two_chip_convolution_matrix() {
        let s = 1.0 / 2f64.sqrt();
        let c = build_convolution_matrix(&[s, -s], 2);
        let expected = ComplexMatrix::from_real_rows(&[&[s, 0.0], &[-s, s], &[0.0, -s]]);
        assert_eq!(c, expected);
    }

    #[test]
    fn columns_preserve_code_norm() {
        let set = gen_spreading_set(1, 8, 1, 1);
        let c = build_convolution_matrix(set.code(0, 0), 5);
        for j in 0..5 {
            assert!((c.column(j).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_blocks_layout() {
        let one = ComplexMatrix::from_real_rows(&[&[1.0]]);
        let cm = build_constraint_matrices(&one, &one).unwrap();
        assert_eq!(cm.cstk, ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(cm.cbar, ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = build_convolution_matrix(&[1.0, 1.0], 2);
        let b = build_convolution_matrix(&[1.0, 1.0], 3);
        assert!(matches!(build_constraint_matrices(&a, &b), Err(AirlinkError::ShapeMismatch { .. })));
    }

    #[test]
    fn constraint_gram_structure() {
        let set = gen_spreading_set(1, 8, 2, 5);
        let cm = user_constraints(&set, 0, 3);
        // block-diagonal Gram matrix of the stacked constraint
        let gram = cm.cstk.h_matmul(&cm.cstk);
        let g1 = cm.c1.h_matmul(&cm.c1);
        let g2 = cm.c2.h_matmul(&cm.c2);
        assert!((&gram.block(0, 0, 3, 3) - &g1).frobenius_norm() < 1e-14);
        assert!((&gram.block(3, 3, 3, 3) - &g2).frobenius_norm() < 1e-14);
        assert!(gram.block(0, 3, 3, 3).frobenius_norm() < 1e-14);
        // the cross Gram matrix has zero diagonal blocks
        let cross = cm.cstk.h_matmul(&cm.cbar);
        assert!(cross.block(0, 0, 3, 3).frobenius_norm() < 1e-14);
        assert!(cross.block(3, 3, 3, 3).frobenius_norm() < 1e-14);
        // structural zero pattern
        assert_eq!(cm.cstk.nnz(), cm.c1.nnz() + cm.c2.nnz());
        assert_eq!(cm.cbar.nnz(), cm.c1.nnz() + cm.c2.nnz());
    }
}
