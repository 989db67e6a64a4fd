//! Browser front end for the receiver lab. Each export takes plain numbers
//! and returns a JSON string the page can plot directly.
//!
//! The `*_json` functions hold the logic and run natively; the
//! `#[wasm_bindgen]` wrappers only turn errors into JavaScript exceptions.

use serde::Serialize;
use stlab_core::analysis::{capacity_bound, convexity_margin};
use stlab_core::chest::subspace_channel_svd;
use stlab_core::complexla::{alignment, ComplexVector, C64};
use stlab_core::xpcli::{
    first_block_model, run_trial, symbol_series, Algorithm, MetricKind, OneOrMany, ScenarioConfig, TrialPoint, PRESET_NU,
};
use wasm_bindgen::prelude::*;

/// Keeps a single click under a few seconds in the browser.
const MAX_WORK: usize = 40_000;

#[derive(Serialize)]
struct Curve {
    label: String,
    y: Vec<f64>,
}

#[derive(Serialize)]
struct Convergence {
    x: Vec<f64>,
    curves: Vec<Curve>,
}

fn desk(users: usize, snr_db: f64) -> ScenarioConfig {
    ScenarioConfig {
        users,
        chips: 16,
        lp: 3,
        snr_db: OneOrMany::One(snr_db),
        nu: PRESET_NU,
        ..ScenarioConfig::default()
    }
}

/// Windowed BER of blind CCM and CMV against the symbol index.
pub fn ber_convergence_json(users: usize, snr_db: f64, packet: usize, trials: usize, seed: u64) -> Result<String, String> {
    if packet * trials > MAX_WORK {
        return Err(format!("packet × trials must stay below {MAX_WORK}"));
    }
    let packet = packet.max(2) & !1;
    let cfg = ScenarioConfig {
        packet,
        ber_window: (packet / 20).max(2),
        trials,
        base_seed: seed,
        receiver_mode: OneOrMany::Many(vec![Algorithm::Ccm, Algorithm::Cmv]),
        ..desk(users, snr_db)
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let point = TrialPoint::nominal(&cfg);
    let outcomes = (0..trials as u64)
        .map(|i| run_trial(&cfg, seed.wrapping_add(i), point))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut x = Vec::new();
    let mut curves = Vec::new();
    for s in symbol_series(&cfg, &outcomes) {
        if s.kind == MetricKind::BerVsSymbol {
            x = s.x;
            curves.push(Curve { label: s.algorithm, y: s.y });
        }
    }
    serde_json::to_string(&Convergence { x, curves }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct AlignmentPoint {
    p: u32,
    alignment: f64,
}

/// Alignment `|ĝᴴg|` of the subspace channel estimate for p = 1, 2, 3,
/// computed from the exact covariance of one channel draw.
pub fn alignment_vs_p_json(users: usize, snr_db: f64, seed: u64) -> Result<String, String> {
    let cfg = desk(users, snr_db);
    cfg.validate().map_err(|e| e.to_string())?;
    let model = first_block_model(&cfg, seed, TrialPoint::nominal(&cfg), 0).map_err(|e| e.to_string())?;
    let g = model.g.normalized().ok_or("zero channel")?;
    let points = (1..=3)
        .map(|p| {
            let est = subspace_channel_svd(&model.covariance, &model.signature.direct, p, model.noise_var)
                .map_err(|e| e.to_string())?;
            Ok(AlignmentPoint {
                p,
                alignment: alignment(&est.ghat, &g),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Explorer {
    f: f64,
    margin: f64,
    hessian_min_eig: f64,
    convex: bool,
    qs_max: usize,
    k_max: usize,
    admitted: bool,
}

/// CM convexity for constraint scale `nu`, desired amplitude `a1` and
/// channel overlap `|gᴴĝ|`, next to the user capacity of an `n`-chip code
/// with `nt` transmit antennas and `lp` paths.
pub fn explore_json(nu: f64, a1: f64, overlap: f64, n: usize, nt: usize, lp: usize, users: usize) -> Result<String, String> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err("overlap must lie in [0, 1]".into());
    }
    let g = ComplexVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let ghat = ComplexVector::from_vec(vec![C64::new(overlap, 0.0), C64::new((1.0 - overlap * overlap).sqrt(), 0.0)]);
    let cvx = convexity_margin(nu, a1, &g, &ghat).map_err(|e| e.to_string())?;
    let cap = capacity_bound(n, nt, lp).map_err(|e| e.to_string())?;
    serde_json::to_string(&Explorer {
        f: cvx.f,
        margin: cvx.margin,
        hessian_min_eig: cvx.hessian_min_eig,
        convex: cvx.convex,
        qs_max: cap.qs_max,
        k_max: cap.k_max,
        admitted: cap.admits(users),
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn ber_convergence(users: usize, snr_db: f64, packet: usize, trials: usize, seed: u32) -> Result<String, JsError> {
    ber_convergence_json(users, snr_db, packet, trials, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn alignment_vs_p(users: usize, snr_db: f64, seed: u32) -> Result<String, JsError> {
    alignment_vs_p_json(users, snr_db, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn explore(nu: f64, a1: f64, overlap: f64, n: usize, nt: usize, lp: usize, users: usize) -> Result<String, JsError> {
    explore_json(nu, a1, overlap, n, nt, lp, users).map_err(|e| JsError::new(&e))
}
