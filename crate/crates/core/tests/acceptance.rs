//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion reports a PASS/FAIL line even when an earlier one fails.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stlab_core::airlink::{
    gen_spreading_set, noise_variance, random_qpsk, symbol_responses, synthesize_stream,
    user_constraints, user_signature, ChannelModel, Frame, SpreadingSet, StbcLayout,
};
use stlab_core::analysis::{capacity_bound, convexity_margin, hessian_cm, identifiability_check};
use stlab_core::chest::{channel_rls_step, subspace_channel_svd, ChannelEstimatorState};
use stlab_core::complexla::{
    alignment, hermitian_eigen, inverse_hermitian, matrix_power, mil_update, smallest_eigvec, ComplexMatrix,
    ComplexVector, C64,
};
use stlab_core::receivers::{ccm_rls_step, BlindCriterion, ReceiverState, RlsParams};
use stlab_core::xpcli::cli::equivalence_at;
use stlab_core::xpcli::{
    mean_ci, preset, run_point, symbol_series, Algorithm, ChannelEstimate, MetricKind, OneOrMany, ScenarioConfig,
    TrialOutcome, TrialPoint,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    use rand_distr::{Distribution, StandardNormal};
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// Orthonormal basis from the eigenvectors of a random Hermitian matrix.
fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let a = random_matrix(n, n, rng);
    let h = &a + &a.h();
    hermitian_eigen(&h).unwrap().1
}

fn desk(users: usize) -> ScenarioConfig {
    ScenarioConfig {
        users,
        chips: 16,
        lp: 3,
        ..ScenarioConfig::default()
    }
}

fn constraint_invariant() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (users, chips, lp, steps) = (4, 16, 3, 2000);
    let layout = StbcLayout::Alamouti;
    let codes = gen_spreading_set(users, chips, 2, 7);
    let model = ChannelModel::draw(layout, 1, lp, &[0.0, -3.0, -6.0], 0.0, &mut rng).unwrap();
    let channels = vec![model.realization_at(0.0); steps];
    let amplitudes = vec![vec![1.0; users]; steps];
    let symbols: Vec<Vec<C64>> = (0..users)
        .map(|_| (0..2 * steps).map(|_| random_qpsk(&mut rng)).collect())
        .collect();
    let frame = Frame {
        layout,
        codes: &codes,
        lp,
        channels: &channels,
        amplitudes: &amplitudes,
        symbols: &symbols,
    };
    let stream = synthesize_stream(&frame, noise_variance(15.0, 1.0), &mut rng).unwrap();
    let signature = user_signature(layout, &codes, 0, lp);
    let params = RlsParams {
        nu: 1.5,
        ..RlsParams::default()
    };
    let mut est = ChannelEstimatorState::new(2 * lp);
    let mut rx = ReceiverState::new(BlindCriterion::Ccm, &signature, est.ghat(), params).unwrap();
    let mut worst = 0.0f64;
    for block in &stream {
        ccm_rls_step(&mut rx, &block.y[0], est.ghat()).unwrap();
        worst = worst.max(rx.constraint_residual(est.ghat()));
        let gamma_bar = rx.conjugate().map(|c| c.gamma().clone());
        channel_rls_step(&mut est, rx.direct().gamma(), gamma_bar.as_ref()).unwrap();
        rx.refresh(est.ghat()).unwrap();
        worst = worst.max(rx.constraint_residual(est.ghat()));
    }
    verdict(worst <= 1e-6, format!("max residual {worst:.2e} over {steps} steps"))
}

fn mil_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let n = 32;
    let (forget, delta) = (0.99, 1.0);
    let mut p = ComplexMatrix::identity(n).scale_real(delta);
    let mut pinv = ComplexMatrix::identity(n).scale_real(1.0 / delta);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let x = random_matrix(n, 1, &mut rng).column(0);
        pinv = mil_update(&pinv, &x, forget, 1.0).unwrap();
        p = p.scale_real(forget);
        p.add_outer(C64::new(1.0, 0.0), &x, &x);
        let direct = inverse_hermitian(&p).unwrap();
        let err = (&pinv - &direct).frobenius_norm() / direct.frobenius_norm();
        worst = worst.max(err);
    }
    verdict(worst <= 1e-8, format!("max relative error {worst:.2e}"))
}

fn lemma_convergence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let v = random_unitary(6, &mut rng);
    let spectrum = [3.0, 8.0, 1.0, 1.0, 1.0, 1.0];
    let r = v.matmul(&ComplexMatrix::diag_real(&spectrum)).matmul(&v.h());
    let vn = v.block(0, 2, 6, 4);
    let projector = vn.matmul(&vn.h());
    let rinv = inverse_hermitian(&r).unwrap();
    let errs: Vec<f64> = (1..=8)
        .map(|p| (&matrix_power(&rinv, p) - &projector).frobenius_norm())
        .collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let last = errs[7];
    verdict(monotone && last <= 1e-3, format!("error at p=8 {last:.2e}, non-increasing {monotone}"))
}

fn channel_estimation() -> Verdict {
    let cfg = desk(4);
    let model = stlab_core::xpcli::first_block_model(&cfg, 3, TrialPoint::nominal(&cfg), 0).unwrap();
    let g = model.g.normalized().unwrap();
    let align = |p: u32| {
        let est = subspace_channel_svd(&model.covariance, &model.signature.direct, p, model.noise_var).unwrap();
        alignment(&est.ghat, &g)
    };
    let (a1, a2) = (align(1), align(2));
    verdict(a2 >= 0.995 && a2 >= a1, format!("alignment p=1 {a1:.6}, p=2 {a2:.6}"))
}

fn tracker_equivalence() -> Verdict {
    let cfg = desk(4);
    let model = stlab_core::xpcli::first_block_model(&cfg, 3, TrialPoint::nominal(&cfg), 0).unwrap();
    let rinv = inverse_hermitian(&model.covariance).unwrap();
    let c = &model.signature.direct;
    let cbar = model.signature.conjugate.as_ref().unwrap();
    let gamma = c.h_matmul(&rinv.matmul(c));
    let gamma_bar = cbar.h_matmul(&rinv.matmul(cbar));
    let (_, target) = smallest_eigvec(&(&gamma + &gamma_bar.conj())).unwrap();
    let mut est = ChannelEstimatorState::new(c.cols());
    for _ in 0..500 {
        channel_rls_step(&mut est, &gamma, Some(&gamma_bar)).unwrap();
    }
    let a = alignment(est.ghat(), &target);
    verdict(a >= 1.0 - 1e-6, format!("alignment after 500 steps 1 - {:.2e}", 1.0 - a))
}

fn noise_free_exactness() -> Verdict {
    let cfg = ScenarioConfig {
        channel_estimate: ChannelEstimate::Ideal,
        receiver_mode: OneOrMany::Many(vec![Algorithm::Ccm, Algorithm::Cmv]),
        ..desk(1)
    };
    let point = TrialPoint {
        snr_db: f64::INFINITY,
        users: 1,
    };
    let mut errors = 0u64;
    for seed in 0..5 {
        let out = stlab_core::xpcli::run_trial(&cfg, seed, point).unwrap();
        for t in &out.traces {
            errors += t.errors[100..].iter().map(|&e| u64::from(e)).sum::<u64>();
        }
    }
    verdict(errors == 0, format!("{errors} bit errors after symbol 100 over 5 packets"))
}

/// Per-trial BER of `label` over symbols `[from, ..)`.
fn trial_ber(outcomes: &[TrialOutcome], label: &str, from: usize) -> Vec<f64> {
    outcomes
        .iter()
        .map(|o| {
            let t = o.trace(label).unwrap();
            t.ber(from, t.errors.len())
        })
        .collect()
}

/// Lower end of the 95% interval of the mean paired difference `worse − better`.
fn paired_gap(worse: &[f64], better: &[f64]) -> (f64, f64) {
    let diff: Vec<f64> = worse.iter().zip(better).map(|(w, b)| w - b).collect();
    let (m, ci) = mean_ci(&diff);
    (m, m - ci)
}

fn fig4_ordering() -> Verdict {
    let cfg = ScenarioConfig {
        trials: 50,
        snr_db: OneOrMany::One(15.0),
        ..preset("fig4a").unwrap()
    };
    let outcomes = run_point(&cfg, TrialPoint::nominal(&cfg), &cfg.algorithms()).unwrap();
    let chain = ["mmse", "ccm", "ccm-rx1", "cmv-rx1"];
    let from = cfg.ber_from_symbol;
    let steady: Vec<Vec<f64>> = chain.iter().map(|l| trial_ber(&outcomes, l, from)).collect();
    let whole: Vec<f64> = chain.iter().map(|l| mean_ci(&trial_ber(&outcomes, l, 0)).0).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, label) in chain.iter().enumerate() {
        parts.push(format!("{label} {:.2e}", mean_ci(&steady[i]).0));
    }
    for i in 0..chain.len() - 1 {
        let (gap, low) = paired_gap(&steady[i + 1], &steady[i]);
        pass &= low > 0.0;
        parts.push(format!("{}-{} gap {gap:.2e} (low {low:.2e})", chain[i + 1], chain[i]));
    }
    parts.push(format!(
        "whole packet {}",
        chain.iter().zip(&whole).map(|(l, b)| format!("{l} {b:.2e}")).collect::<Vec<_>>().join(", ")
    ));
    verdict(pass, format!("from symbol {from}: {}", parts.join("; ")))
}

fn window_at(cfg: &ScenarioConfig, outcomes: &[TrialOutcome], label: &str, end: usize) -> f64 {
    let series = symbol_series(cfg, outcomes);
    let s = series
        .iter()
        .find(|s| s.kind == MetricKind::BerVsSymbol && s.algorithm == label)
        .unwrap();
    let i = s.x.iter().position(|&x| x as usize == end).unwrap();
    s.y[i]
}

fn fig2_shape() -> Verdict {
    let cfg = ScenarioConfig {
        trials: 50,
        ..preset("fig2").unwrap()
    };
    let outcomes = run_point(&cfg, TrialPoint::nominal(&cfg), &cfg.algorithms()).unwrap();
    let w = cfg.ber_window;
    let event = cfg.dynamic_events[0].symbol_index;
    let pre = window_at(&cfg, &outcomes, "ccm", event);
    let post = window_at(&cfg, &outcomes, "ccm", event + w);
    let end = cfg.packet;
    let final_ccm = window_at(&cfg, &outcomes, "ccm", end);
    let final_cmv = window_at(&cfg, &outcomes, "cmv", end);
    let pass = post > pre && final_ccm <= 2.0 * pre && final_ccm <= final_cmv;
    verdict(
        pass,
        format!(
            "ccm window BER before {pre:.2e}, after {post:.2e}, final {final_ccm:.2e}; cmv final {final_cmv:.2e}"
        ),
    )
}

fn mse_at(cfg: &ScenarioConfig, symbol: usize) -> f64 {
    let outcomes = run_point(cfg, TrialPoint::nominal(cfg), &cfg.algorithms()).unwrap();
    let series = symbol_series(cfg, &outcomes);
    let s = series.iter().find(|s| s.kind == MetricKind::MseVsSymbol).unwrap();
    let i = s.x.iter().position(|&x| x as usize == symbol).unwrap();
    s.y[i]
}

fn fig3_shape() -> Verdict {
    let two = ScenarioConfig {
        trials: 50,
        ..preset("fig3").unwrap()
    };
    let one = ScenarioConfig {
        trials: 50,
        ..preset("fig3-1tx").unwrap()
    };
    let (m2, m1) = (mse_at(&two, 1000), mse_at(&one, 1000));
    verdict(m2 < m1, format!("MSE at symbol 1000: 2 Tx {m2:.4e}, 1 Tx {m1:.4e}"))
}

fn appendix_convexity() -> Verdict {
    let g = ComplexVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
    let full = convexity_margin(1.0, 1.0, &g, &g).unwrap().margin;
    let half = convexity_margin(1.0, 0.5, &g, &g).unwrap().margin;
    let (_, eig) = hessian_cm(&ComplexVector::zeros(3), 1.0).unwrap();
    let pass = full == 0.75 && half == 0.0 && (eig - 12.0).abs() <= 1e-9;
    verdict(pass, format!("margins {full}, {half}; Hessian min eigenvalue {eig}"))
}

fn appendix_equivalence() -> Verdict {
    let cfg = desk(1);
    let snrs = [5.0, 10.0, 15.0, 20.0, 25.0];
    let res: Vec<f64> = snrs.iter().map(|&s| equivalence_at(&cfg, s).unwrap().residual_rel).collect();
    let pass = res.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = res.iter().map(|r| format!("{r:.3e}")).collect();
    verdict(pass, format!("relative residuals {}", shown.join(", ")))
}

/// Two users with identical codes but different channels.
fn duplicate_user_identifiable(lp: usize) -> bool {
    let base = gen_spreading_set(1, 16, 2, 5);
    let codes = vec![vec![base.code(0, 0).to_vec(), base.code(0, 1).to_vec()]; 2];
    let set = SpreadingSet::from_codes(codes).unwrap();
    identifiable(&set, lp, 2, 17)
}

fn identifiable(set: &SpreadingSet, lp: usize, users: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = StbcLayout::Alamouti;
    let mut responses = Vec::new();
    for user in 0..users {
        let model = ChannelModel::draw(layout, 1, lp, &[0.0; 8], 0.0, &mut rng).unwrap();
        let mut amps = vec![0.0; users];
        amps[user] = 1.0;
        responses.extend(symbol_responses(layout, set, lp, &model.realization_at(0.0), &amps, 0).unwrap());
    }
    let cols: Vec<ComplexVector> = responses.iter().flat_map(|r| [r.re.clone(), r.im.clone()]).collect();
    let x = ComplexMatrix::from_columns(&cols);
    let m = user_constraints(set, 0, lp);
    identifiability_check(&m.cstk, &x, Some((&m.cbar, &x))).unwrap().identifiable
}

fn appendix_capacity() -> Verdict {
    let k2 = capacity_bound(32, 2, 6).unwrap().k_max;
    let k1 = capacity_bound(32, 1, 6).unwrap().k_max;
    let mut reduction = true;
    for n in 8..=64 {
        for lp in 1..=8 {
            let bound = n as f64 - 2.0 * (n as f64 / 3.0).min((lp - 1) as f64);
            let expected = (bound + 1e-9).floor() as usize;
            reduction &= capacity_bound(n, 1, lp).unwrap().k_max == expected;
        }
    }
    let duplicate = duplicate_user_identifiable(3);
    let generic = (0..5).all(|seed| identifiable(&gen_spreading_set(1, 16, 2, 100 + seed), 3, 1, seed));
    let pass = k2 == 43 && k1 == 22 && reduction && !duplicate && generic;
    verdict(
        pass,
        format!(
            "K_max {k2} (2 Tx), {k1} (1 Tx); single-antenna identity {reduction}; duplicate identifiable {duplicate}; generic K=1 identifiable {generic}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict, Duration); 12] = [
        ("constraint invariant", constraint_invariant, Duration::from_secs(30)),
        ("matrix inversion lemma", mil_correctness, Duration::from_secs(5)),
        ("noise-subspace power", lemma_convergence, Duration::from_secs(1)),
        ("subspace channel estimate", channel_estimation, Duration::from_secs(10)),
        ("tracker equivalence", tracker_equivalence, Duration::from_secs(5)),
        ("noise-free exactness", noise_free_exactness, Duration::from_secs(10)),
        ("receiver ordering", fig4_ordering, Duration::from_secs(15 * 60)),
        ("dynamic load shape", fig2_shape, Duration::from_secs(15 * 60)),
        ("transmit-diversity estimation", fig3_shape, Duration::from_secs(10 * 60)),
        ("CM convexity", appendix_convexity, Duration::from_secs(1)),
        ("CM/MV equivalence", appendix_equivalence, Duration::from_secs(2 * 60)),
        ("capacity and identifiability", appendix_capacity, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let pass = v.pass && took <= *budget;
        failed += usize::from(!pass);
        println!(
            "criterion {:>2}: {} {name} ({:.1} s): {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            v.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
