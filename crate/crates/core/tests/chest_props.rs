mod common;

use common::*;
use proptest::prelude::*;
use stlab_core::airlink::{exact_covariance, gen_spreading_set, symbol_responses, user_signature, ChannelModel, StbcLayout};
use stlab_core::chest::{
    channel_mse, channel_rls_step, noise_subspace_power, remove_phase_ambiguity, subspace_channel_svd, ChannelEstimatorState,
};
use stlab_core::complexla::{alignment, hermitian_eigen, smallest_eigvec, ComplexMatrix, C64};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lemma_error_is_nonincreasing(
        seed in any::<u64>(),
        n in 3usize..8,
        signal in prop::collection::vec(0.05f64..20.0, 1..3),
        sigma2 in 0.1f64..3.0,
    ) {
        let mut rng = rng(seed);
        let q = signal.len();
        let v = random_unitary(n, &mut rng);
        let mut spectrum: Vec<f64> = signal.iter().map(|s| sigma2 * (1.0 + s)).collect();
        spectrum.resize(n, sigma2);
        let r = v.matmul(&ComplexMatrix::diag_real(&spectrum)).matmul(&v.h());
        let vn = v.block(0, q, n, n - q);
        let projector = vn.matmul(&vn.h());
        let mut previous = f64::INFINITY;
        for p in 1..=8 {
            let err = (&noise_subspace_power(&r, sigma2, p).unwrap() - &projector).frobenius_norm();
            prop_assert!(err <= previous + 1e-10, "p={p}: {err} > {previous}");
            previous = err;
        }
    }

    #[test]
    fn tracker_finds_the_smallest_eigenvector(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = rng(seed);
        // Well separated bottom of the spectrum so 500 steps suffice.
        let u = random_unitary(n, &mut rng);
        let spectrum: Vec<f64> = (0..n).map(|i| if i == 0 { 0.05 } else { 1.0 + i as f64 }).collect();
        let total = u.matmul(&ComplexMatrix::diag_real(&spectrum)).matmul(&u.h());
        let part = random_hpd(n, 0.0, &mut rng).scale_real(0.01);
        let gamma = &total - &part;
        let gamma_bar = part.conj();
        let mut est = ChannelEstimatorState::new(n);
        for _ in 0..500 {
            channel_rls_step(&mut est, &gamma, Some(&gamma_bar)).unwrap();
            prop_assert!((est.ghat().norm() - 1.0).abs() < 1e-12);
        }
        let (_, target) = smallest_eigvec(&(&gamma + &gamma_bar.conj())).unwrap();
        prop_assert!(alignment(est.ghat(), &target) >= 1.0 - 1e-6);
    }

    #[test]
    fn phase_removal_ignores_global_rotation(seed in any::<u64>(), n in 1usize..8, theta in 0.0f64..6.28) {
        let mut rng = rng(seed);
        let g = random_vector(n, &mut rng);
        let reference = random_vector(n, &mut rng);
        let a = remove_phase_ambiguity(&g, &reference);
        let b = remove_phase_ambiguity(&g.scale(C64::from_polar(1.0, theta)), &reference);
        prop_assert!((&a - &b).norm() <= 1e-10 * g.norm());
        prop_assert!(reference.dot(&a).im.abs() <= 1e-12 * g.norm() * reference.norm());
        prop_assert!(channel_mse(&g.scale(C64::from_polar(1.0, theta)), &g) <= 1e-10 * g.norm_sqr());
    }
}

fn desk_covariance(users: usize, seed: u64) -> (ComplexMatrix, stlab_core::airlink::UserSignature, stlab_core::complexla::ComplexVector) {
    let mut rng = rng(seed);
    let layout = StbcLayout::Alamouti;
    let (chips, lp) = (16, 3);
    let codes = gen_spreading_set(users, chips, 2, seed);
    let ch = ChannelModel::draw(layout, 1, lp, &[0.0, -3.0, -6.0], 0.0, &mut rng)
        .unwrap()
        .realization_at(0.0);
    let amps = vec![1.0; users];
    let sig = user_signature(layout, &codes, 0, lp);
    let r = exact_covariance(&symbol_responses(layout, &codes, lp, &ch, &amps, 0).unwrap(), 0.01, sig.direct.rows());
    (r, sig, ch.stacked(0))
}

#[test]
fn signatures_are_orthogonal_to_the_noise_subspace() {
    let (r, sig, g) = desk_covariance(3, 12);
    let (values, vectors) = hermitian_eigen(&r).unwrap();
    let noise_dim = values.iter().filter(|&&v| v < 0.01 * (1.0 + 1e-6)).count();
    assert!(noise_dim > 0);
    let vn = vectors.block(0, 0, r.rows(), noise_dim);
    let direct = sig.direct.mul_vec(&g);
    let conjugate = sig.conjugate.as_ref().unwrap().mul_vec(&g.conj());
    assert!(vn.h_mul_vec(&direct).norm() <= 1e-8 * direct.norm());
    assert!(vn.h_mul_vec(&conjugate).norm() <= 1e-8 * conjugate.norm());
}

#[test]
fn single_user_subspace_estimate_recovers_channel() {
    for seed in 0..5 {
        let (r, sig, g) = desk_covariance(1, seed);
        let est = subspace_channel_svd(&r, &sig.direct, 1, 0.01).unwrap();
        assert!(alignment(&est.ghat, &g) >= 0.999, "seed {seed}");
        assert!((est.ghat.norm() - 1.0).abs() < 1e-12);
    }
}
