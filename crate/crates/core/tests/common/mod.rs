#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use stlab_core::complexla::{ComplexMatrix, ComplexVector, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// `AAᴴ + shift·I`, Hermitian positive definite.
pub fn random_hpd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let a = random_matrix(n, n, rng);
    let mut h = a.matmul(&a.h());
    for i in 0..n {
        h[(i, i)] += C64::new(shift, 0.0);
    }
    h.symmetrize();
    h
}

pub fn to_na(a: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

pub fn from_na(a: &DMatrix<Complex64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Unitary matrix from the QR factorization of a Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let q = to_na(&random_matrix(n, n, rng)).qr().q();
    from_na(&q)
}

pub fn rel_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}
